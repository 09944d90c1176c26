//! Scenario files: the town and household fixtures and their mock scripts.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{GatewayError, MockBackend};
use crate::household::{EnvironmentSnapshot, Item, ItemClass, ItemState, RuleCritic, WorldError};

pub const DEFAULT_TICKS_PER_DAY: u32 = 48;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed scenario {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Script(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub id: u32,
    pub class: String,
    pub room: String,
    /// Defaults to the class's initial state.
    #[serde(default)]
    pub state: Option<ItemState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub rooms: Vec<String>,
    pub catalog: Vec<ItemClass>,
    pub items: Vec<ItemSpec>,
}

impl WorldSpec {
    /// Builds the snapshot with agents placed per `positions`.
    pub fn build(
        &self,
        positions: impl IntoIterator<Item = (u32, String)>,
    ) -> Result<EnvironmentSnapshot, ConfigError> {
        let catalog: std::collections::BTreeMap<String, ItemClass> = self
            .catalog
            .iter()
            .map(|c| (c.name.clone(), c.clone()))
            .collect();
        if catalog.len() != self.catalog.len() {
            return Err(ConfigError::Invalid("duplicate class in catalog".into()));
        }
        let items = self
            .items
            .iter()
            .map(|spec| Item {
                id: spec.id,
                class: spec.class.clone(),
                room: spec.room.clone(),
                state: spec
                    .state
                    .or_else(|| catalog.get(&spec.class).and_then(|c| c.initial_state)),
            })
            .collect();
        let env = EnvironmentSnapshot {
            rooms: self.rooms.clone(),
            catalog,
            items,
            agent_positions: positions.into_iter().collect(),
            ..Default::default()
        };
        env.validate()?;
        Ok(env)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMemory {
    pub text: String,
    pub importance: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: u32,
    pub name: String,
    #[serde(default)]
    pub initials: Option<String>,
    pub description: String,
    /// `HH:MM intent; HH:MM intent; ...`
    pub lifestyle: String,
    pub start_room: String,
    /// Rooms the agent perceives and may use.
    pub rooms: Vec<String>,
    #[serde(default)]
    pub relationships: String,
    #[serde(default)]
    pub memories: Vec<SeedMemory>,
}

impl AgentProfile {
    pub fn initials(&self) -> String {
        self.initials.clone().unwrap_or_else(|| {
            self.name
                .split_whitespace()
                .filter_map(|w| w.chars().next())
                .collect::<String>()
                .to_uppercase()
        })
    }

    pub fn profile_line(&self) -> String {
        format!("You are {}. {}", self.name, self.description)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encounter {
    /// `HH:MM`
    pub time: String,
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRelationship {
    pub a: String,
    pub b: String,
    pub relationship: String,
    #[serde(default)]
    pub feeling: String,
}

fn default_ticks() -> u32 {
    DEFAULT_TICKS_PER_DAY
}

fn default_start_date() -> String {
    "2023-02-13".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TownScenario {
    pub name: String,
    #[serde(default = "default_start_date")]
    pub start_date: String,
    #[serde(default = "default_ticks")]
    pub ticks_per_day: u32,
    pub world: WorldSpec,
    pub agents: Vec<AgentProfile>,
    #[serde(default)]
    pub encounters: Vec<Encounter>,
    #[serde(default)]
    pub relationships: Vec<SeedRelationship>,
    #[serde(default)]
    pub scripts: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticKind {
    #[default]
    Model,
    Rules,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdScenario {
    pub name: String,
    pub target: String,
    pub world: WorldSpec,
    pub start_room: String,
    #[serde(default)]
    pub critic: CriticKind,
    /// Goal states per activity, for the rule-based critic.
    #[serde(default)]
    pub goals: RuleCritic,
    #[serde(default)]
    pub scripts: Vec<PathBuf>,
}

impl HouseholdScenario {
    pub fn world(&self) -> Result<EnvironmentSnapshot, ConfigError> {
        self.world.build([(0, self.start_room.clone())])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Town(TownScenario),
    Household(HouseholdScenario),
}

impl Scenario {
    /// Reads a scenario file; script paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut scenario: Scenario =
            serde_json::from_str(&text).map_err(|e| ConfigError::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for script in scenario.scripts_mut() {
            if script.is_relative() {
                *script = dir.join(&*script);
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }

    fn scripts_mut(&mut self) -> &mut Vec<PathBuf> {
        match self {
            Scenario::Town(t) => &mut t.scripts,
            Scenario::Household(h) => &mut h.scripts,
        }
    }

    pub fn scripts(&self) -> &[PathBuf] {
        match self {
            Scenario::Town(t) => &t.scripts,
            Scenario::Household(h) => &h.scripts,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Scenario::Town(t) => &t.name,
            Scenario::Household(h) => &h.name,
        }
    }

    /// The scenario's scripted mock backend.
    pub fn mock_backend(&self) -> Result<MockBackend, ConfigError> {
        Ok(MockBackend::from_files(self.scripts())?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            Scenario::Town(t) => t.validate(),
            Scenario::Household(h) => h.world().map(|_| ()),
        }
    }
}

impl TownScenario {
    pub fn minutes_per_tick(&self) -> u32 {
        24 * 60 / self.ticks_per_day
    }

    pub fn agent(&self, name: &str) -> Option<&AgentProfile> {
        self.agents.iter().find(|a| a.name == name)
    }

    pub fn world(&self) -> Result<EnvironmentSnapshot, ConfigError> {
        self.world
            .build(self.agents.iter().map(|a| (a.id, a.start_room.clone())))
    }

    /// Converts `HH:MM` to a tick within the day.
    pub fn slot(&self, time: &str) -> Result<u32, ConfigError> {
        parse_slot(time, self.minutes_per_tick())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ticks_per_day == 0 || 24 * 60 % self.ticks_per_day != 0 {
            return Err(ConfigError::Invalid(format!(
                "ticks_per_day {} does not divide a day",
                self.ticks_per_day
            )));
        }
        chrono::NaiveDate::parse_from_str(&self.start_date, "%Y-%m-%d")
            .map_err(|e| ConfigError::Invalid(format!("start_date: {e}")))?;
        let mut names = BTreeSet::new();
        let mut ids = BTreeSet::new();
        for agent in &self.agents {
            if !names.insert(agent.name.as_str()) || !ids.insert(agent.id) {
                return Err(ConfigError::Invalid(format!(
                    "duplicate agent {}",
                    agent.name
                )));
            }
            for room in agent.rooms.iter().chain([&agent.start_room]) {
                if !self.world.rooms.contains(room) {
                    return Err(ConfigError::Invalid(format!(
                        "{} uses unknown room {room}",
                        agent.name
                    )));
                }
            }
            parse_lifestyle(&agent.lifestyle, self.minutes_per_tick())?;
        }
        for e in &self.encounters {
            self.slot(&e.time)?;
            for name in [&e.a, &e.b] {
                if self.agent(name).is_none() {
                    return Err(ConfigError::Invalid(format!(
                        "encounter with unknown agent {name}"
                    )));
                }
            }
        }
        for r in &self.relationships {
            for name in [&r.a, &r.b] {
                if self.agent(name).is_none() {
                    return Err(ConfigError::Invalid(format!(
                        "relationship with unknown agent {name}"
                    )));
                }
            }
        }
        self.world()?;
        Ok(())
    }
}

pub fn parse_slot(time: &str, minutes_per_tick: u32) -> Result<u32, ConfigError> {
    let bad = || ConfigError::Invalid(format!("bad time {time:?}"));
    let (h, m) = time.trim().split_once(':').ok_or_else(bad)?;
    let (h, m): (u32, u32) = (h.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?);
    if h >= 24 || m >= 60 {
        return Err(bad());
    }
    let minutes = h * 60 + m;
    if minutes % minutes_per_tick != 0 {
        return Err(ConfigError::Invalid(format!(
            "time {time} is not on a {minutes_per_tick}-minute tick"
        )));
    }
    Ok(minutes / minutes_per_tick)
}

/// Parses `HH:MM intent; HH:MM intent` into (tick of day, intent), sorted.
pub fn parse_lifestyle(
    text: &str,
    minutes_per_tick: u32,
) -> Result<Vec<(u32, String)>, ConfigError> {
    let mut out = Vec::new();
    for entry in text.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (time, intent) = entry.split_once(char::is_whitespace).ok_or_else(|| {
            ConfigError::Invalid(format!("lifestyle entry {entry:?} has no intent"))
        })?;
        out.push((
            parse_slot(time, minutes_per_tick)?,
            intent.trim().to_string(),
        ));
    }
    out.sort_by_key(|(slot, _)| *slot);
    if out.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(ConfigError::Invalid(
            "two lifestyle entries share a tick".into(),
        ));
    }
    Ok(out)
}
