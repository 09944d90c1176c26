//! Simulation drivers: the town tick loop and the household day.

pub mod activity;
pub mod household;
pub mod town;
pub mod wander;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use activity::{track_activities, ActivityLedger, RunCounts, ACTIVITY_IDENTITY_THRESHOLD};
pub use household::{run_household_day, HouseholdReport};
pub use town::{run_town, DialogueRecord, DyadSummary, ScheduleEntry, SimulationReport};
pub use wander::{mix_seed, wander_inject};

use crate::embedding::EmbeddingError;
use crate::gateway::GatewayError;
use crate::memory::{MemoryConfig, MemoryError};
use crate::policy::{PolicyError, PolicyStoreConfig};
use crate::scenario::ConfigError;
use crate::social::{SocialConfig, SocialError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Social(#[from] SocialError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toggles {
    pub lifestyle_policy: bool,
    pub social_memory: bool,
    pub mind_wandering: bool,
}

impl Toggles {
    pub const ALL_ON: Toggles = Toggles {
        lifestyle_policy: true,
        social_memory: true,
        mind_wandering: true,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub days: u32,
    pub seed: u64,
    pub toggles: Toggles,
    pub social: SocialConfig,
    pub memory: MemoryConfig,
    pub policy: PolicyStoreConfig,
    /// Memories listed in a planning prompt.
    pub plan_memories: usize,
    /// Memories per query inlined into dialogue prompts without social memory.
    pub raw_dialogue_memories: usize,
    pub max_dialogue_turns: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            days: 1,
            seed: 42,
            toggles: Toggles {
                lifestyle_policy: true,
                social_memory: true,
                mind_wandering: false,
            },
            social: SocialConfig::default(),
            memory: MemoryConfig::default(),
            policy: PolicyStoreConfig::default(),
            plan_memories: 3,
            raw_dialogue_memories: 10,
            max_dialogue_turns: 8,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.days == 0 {
            return Err(ConfigError::Invalid("days must be at least 1".into()));
        }
        if self.max_dialogue_turns == 0
            || self.plan_memories == 0
            || self.raw_dialogue_memories == 0
        {
            return Err(ConfigError::Invalid(
                "turn and memory limits must be positive".into(),
            ));
        }
        self.policy
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub hits: u64,
    pub misses: u64,
    pub commits: u64,
}

impl SimError {
    /// Whether the backend itself failed, as opposed to a bad reply or a
    /// script gap. Such errors end a run instead of being logged per step.
    pub fn is_backend_failure(&self) -> bool {
        matches!(
            self,
            SimError::Gateway(GatewayError::BackendError(_))
                | SimError::Policy(PolicyError::Gateway(GatewayError::BackendError(_)))
                | SimError::Social(SocialError::Gateway(GatewayError::BackendError(_)))
        )
    }
}
