//! A deterministic multi-agent simulator with
//! two cost layers over LLM calls.
//!
//! * [`policy`] caches plan decompositions behind executable conditions and
//!   reuses them when a similar plan recurs in a compatible environment.
//! * [`social`] keeps a compact per-pair relationship/feeling/summary state
//!   in place of raw memory dumps in dialogue prompts.
//!
//! Around them sit the [`household`] world, per-agent [`memory`] with
//! clustering and mind-wandering sampling, the [`sim`] tick loop and the
//! [`report`] exports. All model traffic flows through [`gateway`].

pub mod embedding;
pub mod gateway;
pub mod household;
pub mod memory;
pub mod policy;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod social;

#[cfg(test)]
mod testutil;
