//! Items, environment snapshots and command execution semantics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::command::{ActionCommand, Verb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Property {
    Grabbable,
    Sittable,
    Lieable,
    HasSwitch,
    CanOpen,
    Surface,
    Container,
}

impl Property {
    pub fn as_str(self) -> &'static str {
        match self {
            Property::Grabbable => "GRABBABLE",
            Property::Sittable => "SITTABLE",
            Property::Lieable => "LIEABLE",
            Property::HasSwitch => "HAS_SWITCH",
            Property::CanOpen => "CAN_OPEN",
            Property::Surface => "SURFACE",
            Property::Container => "CONTAINER",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ItemState {
    Open,
    Closed,
    On,
    Off,
}

impl ItemState {
    pub fn as_str(self) -> &'static str {
        match self {
            ItemState::Open => "OPEN",
            ItemState::Closed => "CLOSED",
            ItemState::On => "ON",
            ItemState::Off => "OFF",
        }
    }
}

impl fmt::Display for ItemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemClass {
    pub name: String,
    #[serde(default)]
    pub properties: BTreeSet<Property>,
    #[serde(default)]
    pub initial_state: Option<ItemState>,
}

impl ItemClass {
    pub fn new(name: impl Into<String>, properties: impl IntoIterator<Item = Property>) -> Self {
        Self {
            name: name.into(),
            properties: properties.into_iter().collect(),
            initial_state: None,
        }
    }

    pub fn with_state(mut self, state: ItemState) -> Self {
        self.initial_state = Some(state);
        self
    }

    pub fn has(&self, property: Property) -> bool {
        self.properties.contains(&property)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |msg: &str| Err(WorldError::Invalid(format!("class {}: {msg}", self.name)));
        if self.name.is_empty() || !self.name.chars().all(super::command::is_class_char) {
            return bad("name must be nonempty [A-Za-z0-9_]");
        }
        let state = self.initial_state;
        if self.has(Property::CanOpen)
            && !matches!(state, Some(ItemState::Open | ItemState::Closed))
        {
            return bad("CAN_OPEN requires initial state OPEN or CLOSED");
        }
        if self.has(Property::HasSwitch) && !matches!(state, Some(ItemState::On | ItemState::Off)) {
            return bad("HAS_SWITCH requires initial state ON or OFF");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Item {
    pub id: u32,
    pub class: String,
    pub room: String,
    #[serde(default)]
    pub state: Option<ItemState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Posture {
    SittingOn(u32),
    LyingOn(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("invalid environment: {0}")]
    Invalid(String),
}

/// Why a command could not run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Precondition {
    Property(Property),
    State {
        required: ItemState,
        actual: Option<ItemState>,
    },
    Location {
        agent_room: String,
        item_room: String,
    },
    Capacity,
    NotHeld,
    AlreadyHeld,
    NotSeated,
}

impl fmt::Display for Precondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precondition::Property(p) => write!(f, "item is not {p}"),
            Precondition::State { required, actual } => match actual {
                Some(a) => write!(f, "item must be {required} but is {a}"),
                None => write!(f, "item must be {required} but has no state"),
            },
            Precondition::Location {
                agent_room,
                item_room,
            } => write!(f, "agent is in {agent_room} but item is in {item_room}"),
            Precondition::Capacity => f.write_str("hands are full"),
            Precondition::NotHeld => f.write_str("item is not held"),
            Precondition::AlreadyHeld => f.write_str("item is already held"),
            Precondition::NotSeated => f.write_str("agent is not sitting or lying"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("no item {class} ({id})")]
    NoSuchItem { class: String, id: u32 },
    #[error("no agent char{0}")]
    NoSuchAgent(u32),
    #[error("precondition failed: {0}")]
    PreconditionFailed(Precondition),
}

pub const HAND_CAPACITY: usize = 2;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvironmentSnapshot {
    pub rooms: Vec<String>,
    pub catalog: BTreeMap<String, ItemClass>,
    pub items: Vec<Item>,
    pub agent_positions: BTreeMap<u32, String>,
    #[serde(default)]
    pub held_items: BTreeMap<u32, BTreeSet<u32>>,
    #[serde(default)]
    pub postures: BTreeMap<u32, Posture>,
}

impl EnvironmentSnapshot {
    pub fn validate(&self) -> Result<(), WorldError> {
        let rooms: BTreeSet<&str> = self.rooms.iter().map(String::as_str).collect();
        for class in self.catalog.values() {
            class.validate()?;
        }
        let mut ids = BTreeSet::new();
        for item in &self.items {
            if !ids.insert(item.id) {
                return Err(WorldError::Invalid(format!(
                    "duplicate item id {}",
                    item.id
                )));
            }
            if !rooms.contains(item.room.as_str()) {
                return Err(WorldError::Invalid(format!(
                    "item {} is in unknown room {}",
                    item.id, item.room
                )));
            }
            if !self.catalog.contains_key(&item.class) {
                return Err(WorldError::Invalid(format!(
                    "item {} has unknown class {}",
                    item.id, item.class
                )));
            }
        }
        for (agent, room) in &self.agent_positions {
            if !rooms.contains(room.as_str()) {
                return Err(WorldError::Invalid(format!(
                    "char{agent} starts in unknown room {room}"
                )));
            }
        }
        Ok(())
    }

    pub fn item(&self, id: u32) -> Option<&Item> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn class_of(&self, item: &Item) -> Option<&ItemClass> {
        self.catalog.get(&item.class)
    }

    pub fn items_of_class<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a Item> + 'a {
        self.items.iter().filter(move |i| i.class == class)
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.items.iter().any(|i| i.class == class)
    }

    pub fn held_by(&self, agent: u32) -> usize {
        self.held_items.get(&agent).map_or(0, BTreeSet::len)
    }

    fn holder_of(&self, id: u32) -> Option<u32> {
        self.held_items
            .iter()
            .find(|(_, held)| held.contains(&id))
            .map(|(&agent, _)| agent)
    }

    /// Checks every precondition of `cmd` without touching the environment.
    pub fn check(&self, cmd: &ActionCommand) -> Result<(), ExecError> {
        let agent = cmd.agent_index;
        let agent_room = self
            .agent_positions
            .get(&agent)
            .ok_or(ExecError::NoSuchAgent(agent))?;
        let item = self
            .item(cmd.item_id)
            .filter(|i| i.class == cmd.item_class)
            .ok_or_else(|| ExecError::NoSuchItem {
                class: cmd.item_class.clone(),
                id: cmd.item_id,
            })?;
        let class = self.class_of(item).ok_or_else(|| ExecError::NoSuchItem {
            class: cmd.item_class.clone(),
            id: cmd.item_id,
        })?;
        let fail = |p| Err(ExecError::PreconditionFailed(p));
        let need = |p: Property| {
            if class.has(p) {
                Ok(())
            } else {
                fail(Precondition::Property(p))
            }
        };
        let same_room = || {
            if &item.room == agent_room || self.holder_of(item.id) == Some(agent) {
                Ok(())
            } else {
                fail(Precondition::Location {
                    agent_room: agent_room.clone(),
                    item_room: item.room.clone(),
                })
            }
        };
        let state_is = |required: ItemState| {
            if item.state == Some(required) {
                Ok(())
            } else {
                fail(Precondition::State {
                    required,
                    actual: item.state,
                })
            }
        };
        match cmd.verb {
            Verb::Walk => Ok(()),
            Verb::Grab => {
                need(Property::Grabbable)?;
                same_room()?;
                if self.holder_of(item.id).is_some() {
                    return fail(Precondition::AlreadyHeld);
                }
                if self.held_by(agent) >= HAND_CAPACITY {
                    return fail(Precondition::Capacity);
                }
                Ok(())
            }
            Verb::Open => {
                need(Property::CanOpen)?;
                state_is(ItemState::Closed)
            }
            Verb::Close => {
                need(Property::CanOpen)?;
                state_is(ItemState::Open)
            }
            Verb::SwitchOn => {
                need(Property::HasSwitch)?;
                state_is(ItemState::Off)
            }
            Verb::SwitchOff => {
                need(Property::HasSwitch)?;
                state_is(ItemState::On)
            }
            Verb::Sit => {
                need(Property::Sittable)?;
                same_room()
            }
            Verb::Lie => {
                need(Property::Lieable)?;
                same_room()
            }
            Verb::StandUp => {
                if self.postures.contains_key(&agent) {
                    Ok(())
                } else {
                    fail(Precondition::NotSeated)
                }
            }
            Verb::PutBack => {
                if self.holder_of(item.id) == Some(agent) {
                    Ok(())
                } else {
                    fail(Precondition::NotHeld)
                }
            }
        }
    }

    /// Runs `cmd`. On failure the environment is left untouched.
    pub fn execute(&mut self, cmd: &ActionCommand) -> Result<(), ExecError> {
        self.check(cmd)?;
        let agent = cmd.agent_index;
        let id = cmd.item_id;
        let agent_room = self.agent_positions[&agent].clone();
        let idx = self.items.iter().position(|i| i.id == id).expect("checked");
        match cmd.verb {
            Verb::Walk => {
                let target = self.items[idx].room.clone();
                self.postures.remove(&agent);
                if let Some(held) = self.held_items.get(&agent) {
                    for item in self.items.iter_mut().filter(|i| held.contains(&i.id)) {
                        item.room = target.clone();
                    }
                }
                self.agent_positions.insert(agent, target);
            }
            Verb::Grab => {
                self.held_items.entry(agent).or_default().insert(id);
            }
            Verb::Open => self.items[idx].state = Some(ItemState::Open),
            Verb::Close => self.items[idx].state = Some(ItemState::Closed),
            Verb::SwitchOn => self.items[idx].state = Some(ItemState::On),
            Verb::SwitchOff => self.items[idx].state = Some(ItemState::Off),
            Verb::Sit => {
                self.postures.insert(agent, Posture::SittingOn(id));
            }
            Verb::Lie => {
                self.postures.insert(agent, Posture::LyingOn(id));
            }
            Verb::StandUp => {
                self.postures.remove(&agent);
            }
            Verb::PutBack => {
                if let Some(held) = self.held_items.get_mut(&agent) {
                    held.remove(&id);
                    if held.is_empty() {
                        self.held_items.remove(&agent);
                    }
                }
                self.items[idx].room = agent_room;
            }
        }
        Ok(())
    }

    /// One line per item: `class (id) in room [STATE]`.
    pub fn describe_items<'a>(&self, items: impl IntoIterator<Item = &'a Item>) -> String {
        let mut out = String::new();
        for item in items {
            out.push_str(&format!("{} ({}) in {}", item.class, item.id, item.room));
            if let Some(state) = item.state {
                out.push_str(&format!(" [{state}]"));
            }
            out.push('\n');
        }
        out
    }

    /// Distinct item classes present, sorted.
    pub fn class_names(&self) -> BTreeSet<&str> {
        self.items.iter().map(|i| i.class.as_str()).collect()
    }
}

/// Failed commands within one activity, with the reason they failed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForbiddenSet {
    entries: BTreeMap<String, String>,
}

impl ForbiddenSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, command: impl Into<String>, reason: impl Into<String>) {
        self.entries
            .entry(command.into())
            .or_insert_with(|| reason.into());
    }

    pub fn contains(&self, command: &str) -> bool {
        self.entries.contains_key(command)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(c, r)| (c.as_str(), r.as_str()))
    }
}
