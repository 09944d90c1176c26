//! Executable conditions: what a home must contain for a cached action
//! sequence to run, and how the sequence is re-targeted at a new home.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::household::{ActionCommand, EnvironmentSnapshot, Item, ItemState, Property, Verb};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemPredicate {
    #[serde(rename = "class")]
    pub item_class: String,
    pub min_count: u32,
    #[serde(rename = "properties")]
    pub required_properties: BTreeSet<Property>,
    #[serde(rename = "state")]
    pub required_state: Option<ItemState>,
}

impl ItemPredicate {
    /// Whether `item` counts toward this predicate.
    pub fn admits(&self, item: &Item, env: &EnvironmentSnapshot) -> bool {
        item.class == self.item_class
            && self.required_state.is_none_or(|s| item.state == Some(s))
            && env
                .class_of(item)
                .is_some_and(|class| self.required_properties.iter().all(|&p| class.has(p)))
    }

    pub fn is_satisfied(&self, env: &EnvironmentSnapshot) -> bool {
        let count = env.items.iter().filter(|i| self.admits(i, env)).count();
        count >= self.min_count as usize
    }
}

/// A conjunction of item predicates guarding an action template.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExecCondition {
    pub predicates: Vec<ItemPredicate>,
    pub actions: Vec<ActionCommand>,
}

impl ExecCondition {
    pub fn is_satisfied(&self, env: &EnvironmentSnapshot) -> bool {
        self.predicates.iter().all(|p| p.is_satisfied(env))
    }

    /// Re-targets the action template at `env` and `agent`.
    ///
    /// Per class, template ids that all still name items of that class are
    /// kept. Otherwise the class's distinct template ids, in first-use order,
    /// are mapped onto the items admitted by its predicate in ascending id
    /// order. Returns `None` when a class cannot be bound.
    pub fn bind(&self, env: &EnvironmentSnapshot, agent: u32) -> Option<Vec<ActionCommand>> {
        let mut template_ids: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
        for cmd in &self.actions {
            let ids = template_ids.entry(cmd.item_class.as_str()).or_default();
            if !ids.contains(&cmd.item_id) {
                ids.push(cmd.item_id);
            }
        }
        let mut mapping: BTreeMap<(&str, u32), u32> = BTreeMap::new();
        for (class, ids) in &template_ids {
            let still_valid = ids
                .iter()
                .all(|&id| env.item(id).is_some_and(|i| i.class == *class));
            if still_valid {
                continue;
            }
            let mut targets: Vec<u32> =
                match self.predicates.iter().find(|p| p.item_class == *class) {
                    Some(pred) => env
                        .items
                        .iter()
                        .filter(|i| pred.admits(i, env))
                        .map(|i| i.id)
                        .collect(),
                    None => env.items_of_class(class).map(|i| i.id).collect(),
                };
            targets.sort_unstable();
            if targets.len() < ids.len() {
                return None;
            }
            for (&from, &to) in ids.iter().zip(&targets) {
                mapping.insert((class, from), to);
            }
        }
        Some(
            self.actions
                .iter()
                .map(|cmd| {
                    let id = mapping
                        .get(&(cmd.item_class.as_str(), cmd.item_id))
                        .copied()
                        .unwrap_or(cmd.item_id);
                    ActionCommand::new(agent, cmd.verb, cmd.item_class.clone(), id)
                })
                .collect(),
        )
    }
}

/// The property a verb demands of its target, if any.
pub fn verb_property(verb: Verb) -> Option<Property> {
    match verb {
        Verb::Grab => Some(Property::Grabbable),
        Verb::SwitchOn | Verb::SwitchOff => Some(Property::HasSwitch),
        Verb::Sit => Some(Property::Sittable),
        Verb::Lie => Some(Property::Lieable),
        Verb::Open | Verb::Close => Some(Property::CanOpen),
        Verb::Walk | Verb::StandUp | Verb::PutBack => None,
    }
}

/// Rule-based condition for `actions` as executed from `env`.
///
/// One predicate per distinct class, in first-use order: it requires as many
/// items as distinct ids were used, the union of the properties the verbs
/// demand, and, when some verb changes an item's state, the state that item
/// had in `env` before the sequence ran.
pub fn derive_condition(
    actions: &[ActionCommand],
    env: &EnvironmentSnapshot,
) -> Result<ExecCondition, PolicyError> {
    let mut order: Vec<&str> = Vec::new();
    let mut ids: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    let mut props: BTreeMap<&str, BTreeSet<Property>> = BTreeMap::new();
    let mut states: BTreeMap<&str, ItemState> = BTreeMap::new();
    for cmd in actions {
        let class = cmd.item_class.as_str();
        if !env.catalog.contains_key(class) {
            return Err(PolicyError::UnknownClass(class.to_string()));
        }
        if !ids.contains_key(class) {
            order.push(class);
        }
        ids.entry(class).or_default().insert(cmd.item_id);
        let entry = props.entry(class).or_default();
        entry.extend(verb_property(cmd.verb));
        if cmd.verb.changes_state() && !states.contains_key(class) {
            if let Some(state) = env.item(cmd.item_id).and_then(|i| i.state) {
                states.insert(class, state);
            }
        }
    }
    let predicates = order
        .into_iter()
        .map(|class| ItemPredicate {
            item_class: class.to_string(),
            min_count: ids[class].len() as u32,
            required_properties: props.remove(class).unwrap_or_default(),
            required_state: states.get(class).copied(),
        })
        .collect();
    Ok(ExecCondition {
        predicates,
        actions: actions.to_vec(),
    })
}
