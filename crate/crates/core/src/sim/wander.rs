//! Mind wandering: cluster-weighted memory samples appended to prompts.

use crate::memory::AgentMemory;

/// Events injected per prompt.
pub const WANDER_EVENTS: usize = 3;
/// Draws attempted before giving up on finding fresh events.
pub const MAX_WANDER_DRAWS: usize = 64;
/// Line prefix of an injected event.
pub const STRAY_PREFIX: &str = "(stray thought) ";

/// Derives a per-call seed from the run seed, agent and tick (splitmix64).
pub fn mix_seed(seed: u64, agent: u32, tick: u64) -> u64 {
    let mut z = seed
        ^ u64::from(agent).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ tick.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Appends up to [`WANDER_EVENTS`] distinct sampled events whose text is
/// not already in `prompt`. Returns the prompt unchanged when the memory is
/// empty or nothing fresh turns up within [`MAX_WANDER_DRAWS`] draws.
pub fn wander_inject(memory: &AgentMemory, prompt: &str, seed: u64) -> String {
    let clustering = memory.cluster();
    if clustering.is_empty() {
        return prompt.to_string();
    }
    let mut picked: Vec<&str> = Vec::new();
    for id in clustering.sampler(seed).take(MAX_WANDER_DRAWS) {
        let Some(event) = memory.get(id) else {
            continue;
        };
        let text = event.text.as_str();
        if picked.contains(&text) || prompt.contains(text) {
            continue;
        }
        picked.push(text);
        if picked.len() == WANDER_EVENTS {
            break;
        }
    }
    if picked.is_empty() {
        return prompt.to_string();
    }
    let mut out = prompt.trim_end().to_string();
    out.push_str("\nStray thoughts:\n");
    for text in picked {
        out.push_str(STRAY_PREFIX);
        out.push_str(text);
        out.push('\n');
    }
    out
}
