//! Social memory: one relationship / feeling / summary-events state per pair
//! of agents, used in place of raw memory dumps when prompting dialogue.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::embedding::{cosine, Embedder, EmbeddingVector};
use crate::gateway::{estimate_tokens, Category, Gateway, GatewayError, PromptRequest};
use crate::memory::{AgentMemory, MemoryError};

pub const INITIAL_RELATIONSHIP: &str = "Unknown";
pub const MAX_LABEL_WORDS: usize = 8;
/// Below this cosine an unlisted relationship label scores 0.
pub const MIN_LABEL_SIMILARITY: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SocialError {
    #[error("an agent cannot form a dyad with itself ({0})")]
    SelfDyadError(String),
    #[error("transcript is empty")]
    EmptyTranscript,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialConfig {
    /// Most summary events kept per dyad.
    pub cap: usize,
    /// Token budget for a dialogue prompt.
    pub budget: u64,
    /// Part of the budget kept free for the profile, labels and last turn.
    pub reserve: u64,
    pub dedup_threshold: f64,
    pub top_k: usize,
}

impl Default for SocialConfig {
    fn default() -> Self {
        Self {
            cap: 10,
            budget: 512,
            reserve: 128,
            dedup_threshold: 0.9,
            top_k: 5,
        }
    }
}

impl SocialConfig {
    fn summary_budget(&self) -> u64 {
        self.budget.saturating_sub(self.reserve)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEvent {
    pub text: String,
    #[serde(skip)]
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: String,
    pub text: String,
}

impl Turn {
    pub fn new(speaker: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            speaker: speaker.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadState {
    /// The two agents, sorted.
    pub pair: (String, String),
    pub relationship: String,
    pub feeling: String,
    pub summary_events: Vec<SummaryEvent>,
    pub last_updated: u64,
    /// Optional per-direction feelings, keyed by the agent who feels them.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub feeling_from: BTreeMap<String, String>,
}

pub fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

pub fn init_dyad(a: &str, b: &str) -> Result<DyadState, SocialError> {
    if a == b {
        return Err(SocialError::SelfDyadError(a.to_string()));
    }
    Ok(DyadState {
        pair: pair_key(a, b),
        relationship: INITIAL_RELATIONSHIP.to_string(),
        feeling: String::new(),
        summary_events: Vec::new(),
        last_updated: 0,
        feeling_from: BTreeMap::new(),
    })
}

impl DyadState {
    /// `A|B` with the pair in sorted order.
    pub fn key(&self) -> String {
        format!("{}|{}", self.pair.0, self.pair.1)
    }

    /// The feeling `agent` holds: its directional override if set.
    pub fn feeling_of(&self, agent: &str) -> &str {
        self.feeling_from.get(agent).unwrap_or(&self.feeling)
    }

    pub fn summary_block(&self) -> String {
        let mut out = String::new();
        for e in &self.summary_events {
            out.push_str("- ");
            out.push_str(&e.text);
            out.push('\n');
        }
        out
    }

    fn is_duplicate(&self, candidate: &EmbeddingVector, threshold: f64) -> bool {
        self.summary_events
            .iter()
            .any(|e| cosine(&e.embedding, candidate).unwrap_or(0.0) >= threshold)
    }

    fn over_limits(&self, config: &SocialConfig) -> bool {
        self.summary_events.len() > config.cap
            || estimate_tokens(&self.summary_block()) > config.summary_budget()
    }

    /// Keeps the most recent events that fit the cap and the token budget.
    fn truncate_to_limits(&mut self, config: &SocialConfig) {
        let excess = self.summary_events.len().saturating_sub(config.cap);
        self.summary_events.drain(..excess);
        while !self.summary_events.is_empty() && self.over_limits(config) {
            self.summary_events.remove(0);
        }
    }
}

/// Folds the events relevant to `turn_text` from `memory` into the dyad's
/// summary.
///
/// Retrieved events within the dedup threshold of an existing summary event
/// are dropped. If the summary then exceeds the cap or the token budget, one
/// compression request replaces it with the reply's lines; an empty reply
/// keeps the most recent events instead.
pub fn absorb_events(
    dyad: &mut DyadState,
    turn_text: &str,
    memory: &AgentMemory,
    now: u64,
    gateway: &Gateway,
    config: &SocialConfig,
) -> Result<(), SocialError> {
    if memory.is_empty() {
        return Ok(());
    }
    for event in memory.retrieve(turn_text, config.top_k, now)? {
        if !dyad.is_duplicate(&event.embedding, config.dedup_threshold) {
            dyad.summary_events.push(SummaryEvent {
                text: event.text.clone(),
                embedding: event.embedding.clone(),
            });
        }
    }
    if !dyad.over_limits(config) {
        return Ok(());
    }
    let prompt = format!(
        "Condense these events about {} and {} into at most {} short lines, \
         most important last:\n{}",
        dyad.pair.0,
        dyad.pair.1,
        config.cap,
        dyad.summary_block()
    );
    let reply = gateway.complete(
        &PromptRequest::new(Category::SummaryCompression, prompt)
            .key(format!("compress|{}", dyad.key())),
    )?;
    let lines: Vec<&str> = reply
        .text
        .lines()
        .map(crate::household::pipeline::strip_list_marker)
        .filter(|l| !l.is_empty())
        .collect();
    if !lines.is_empty() {
        let embedder = memory.embedder();
        let old = std::mem::take(&mut dyad.summary_events);
        for line in lines {
            let embedding = embedder.embed(line).map_err(MemoryError::from)?;
            if !dyad.is_duplicate(&embedding, config.dedup_threshold) {
                dyad.summary_events.push(SummaryEvent {
                    text: line.to_string(),
                    embedding,
                });
            }
        }
        if dyad.summary_events.is_empty() {
            dyad.summary_events = old;
        }
    }
    dyad.truncate_to_limits(config);
    Ok(())
}

pub fn relationship_line(relationship: &str, feeling: &str) -> String {
    let feeling = if feeling.is_empty() { "none" } else { feeling };
    format!("Relationship: {relationship}, Feeling: {feeling}")
}

/// Dialogue prompt from the profile line, the dyad's labels and summary,
/// and the last turn. The caller sets the scenario key and attribution.
pub fn build_dialogue_prompt(
    dyad: &DyadState,
    speaker: &str,
    self_profile: &str,
    last_turn: &str,
) -> PromptRequest {
    let summary = dyad.summary_block();
    let prompt = format!(
        "{self_profile}\n{}\nEvents that matter between you:\n{}Last turn: {}\n\
         Reply with your next line, or <END> to finish.",
        relationship_line(&dyad.relationship, dyad.feeling_of(speaker)),
        if summary.is_empty() {
            "- none\n"
        } else {
            &summary
        },
        if last_turn.is_empty() {
            "(you speak first)"
        } else {
            last_turn
        },
    );
    PromptRequest::new(Category::DialogueTurn, prompt)
}

pub fn render_transcript(transcript: &[Turn]) -> String {
    transcript
        .iter()
        .map(|t| format!("{}: {}\n", t.speaker, t.text))
        .collect()
}

fn clip_words(label: &str) -> String {
    label
        .split_whitespace()
        .take(MAX_LABEL_WORDS)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Reads `Relationship: X, Feeling: Y`, or a JSON object with
/// `relationship` and `feeling`.
pub fn parse_update(text: &str) -> Option<(String, String)> {
    if let Some(start) = text.find('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(obj))) = stream.next() {
            if let (Some(Value::String(r)), Some(Value::String(f))) =
                (obj.get("relationship"), obj.get("feeling"))
            {
                return Some((clip_words(r), clip_words(f)));
            }
        }
    }
    let lower = text.to_lowercase();
    let r = lower.find("relationship:")?;
    let f = lower.find("feeling:")?;
    let field = |from: usize, to: Option<usize>| {
        let raw = match to {
            Some(to) if to > from => &text[from..to],
            _ => &text[from..],
        };
        let raw = raw.lines().next().unwrap_or("");
        clip_words(raw.trim().trim_end_matches([',', '.', ';']).trim())
    };
    let (relationship, feeling) = if r < f {
        (
            field(r + "relationship:".len(), Some(f)),
            field(f + "feeling:".len(), None),
        )
    } else {
        (
            field(r + "relationship:".len(), None),
            field(f + "feeling:".len(), Some(r)),
        )
    };
    (!relationship.is_empty()).then_some((relationship, feeling))
}

/// Asks for the pair's new labels after a conversation. An unparseable reply
/// keeps the old labels.
pub fn update_after_conversation(
    dyad: &mut DyadState,
    transcript: &[Turn],
    now: u64,
    gateway: &Gateway,
) -> Result<(), SocialError> {
    if transcript.is_empty() {
        return Err(SocialError::EmptyTranscript);
    }
    let prompt = format!(
        "{} and {} just talked.\n{}\n{}\
         Describe their relationship and feeling now, as \"Relationship: <label>, Feeling: <label>\".",
        dyad.pair.0,
        dyad.pair.1,
        relationship_line(&dyad.relationship, &dyad.feeling),
        render_transcript(transcript),
    );
    let reply = gateway.complete(
        &PromptRequest::new(Category::DialogueUpdate, prompt).key(format!("update|{}", dyad.key())),
    )?;
    match parse_update(&reply.text) {
        Some((relationship, feeling)) => {
            dyad.relationship = relationship;
            dyad.feeling = feeling;
        }
        None => log::warn!(
            "unparseable relationship update for {}: {:?}",
            dyad.key(),
            reply.text
        ),
    }
    dyad.last_updated = now;
    Ok(())
}

/// Relationship label → score in 0..=10.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationshipScale {
    pub table: BTreeMap<String, u8>,
}

impl Default for RelationshipScale {
    fn default() -> Self {
        let table = [
            ("unknown", 0),
            ("strangers", 0),
            ("stranger", 0),
            ("acquaintance", 3),
            ("acquaintances", 3),
            ("co-worker", 5),
            ("coworker", 5),
            ("colleague", 5),
            ("colleagues", 5),
            ("friend", 6),
            ("friends", 6),
            ("close friend", 7),
            ("close friends", 7),
            ("family", 9),
            ("married", 10),
            ("spouse", 10),
        ];
        Self {
            table: table.into_iter().map(|(l, s)| (l.to_string(), s)).collect(),
        }
    }
}

/// Case-insensitive table lookup; other labels take the score of the most
/// similar table label, or 0 if none reaches [`MIN_LABEL_SIMILARITY`].
pub fn quantize(label: &str, scale: &RelationshipScale, embedder: &Embedder) -> u8 {
    let key = label.trim().to_lowercase();
    if let Some(&score) = scale.table.get(&key) {
        return score.min(10);
    }
    let Ok(query) = embedder.embed(&key) else {
        return 0;
    };
    let mut best: Option<(f64, u8)> = None;
    for (known, &score) in &scale.table {
        let Ok(v) = embedder.embed(known) else {
            continue;
        };
        let sim = cosine(&query, &v).unwrap_or(0.0);
        if best.is_none_or(|(b, _)| sim > b) {
            best = Some((sim, score));
        }
    }
    match best {
        Some((sim, score)) if sim >= MIN_LABEL_SIMILARITY => score.min(10),
        _ => {
            log::warn!("relationship label {label:?} matches nothing on the scale; scoring 0");
            0
        }
    }
}

/// All dyads of a simulation, keyed by sorted pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DyadTable {
    dyads: BTreeMap<String, DyadState>,
}

impl DyadTable {
    pub fn get(&self, a: &str, b: &str) -> Option<&DyadState> {
        let (x, y) = pair_key(a, b);
        self.dyads.get(&format!("{x}|{y}"))
    }

    pub fn get_or_init(&mut self, a: &str, b: &str) -> Result<&mut DyadState, SocialError> {
        let dyad = init_dyad(a, b)?;
        Ok(self.dyads.entry(dyad.key()).or_insert(dyad))
    }

    pub fn iter(&self) -> impl Iterator<Item = &DyadState> {
        self.dyads.values()
    }

    pub fn len(&self) -> usize {
        self.dyads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dyads.is_empty()
    }
}
