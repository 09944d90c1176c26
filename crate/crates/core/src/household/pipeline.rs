//! Target → activities → action commands, with a forbidden-actions retry loop
//! and a critic that decides when an activity is complete.
//!
//! Per activity the plan module first proposes a rough verb-noun command
//! ("switchon tv"), then resolves the noun to a concrete item id (asking the
//! model only when a class has several instances), then renders the grammar
//! command. Proposals already in the forbidden set are rejected and the
//! model is re-prompted, up to [`MAX_PROPOSALS`] times.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::command::{is_class_char, parse_command, ActionCommand, Verb};
use super::world::{EnvironmentSnapshot, ForbiddenSet, ItemState, Posture};
use crate::gateway::{Category, Gateway, GatewayError, PromptRequest};

/// Proposals per `next_action` call before the activity counts as stuck.
pub const MAX_PROPOSALS: usize = 5;
/// `next_action` calls per activity before giving up.
pub const MAX_STEPS: usize = 30;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("activity {activity:?} stuck after {proposals} rejected proposals")]
    ActivityStuck { activity: String, proposals: usize },
    #[error("activity text is empty")]
    EmptyActivity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextAction {
    Command(ActionCommand),
    Done,
}

fn agent_label(agent: u32) -> String {
    format!("char{agent}")
}

fn bullet_list<I: IntoIterator<Item = String>>(lines: I) -> String {
    let mut out = String::new();
    for line in lines {
        out.push_str("- ");
        out.push_str(&line);
        out.push('\n');
    }
    if out.is_empty() {
        out.push_str("- none\n");
    }
    out
}

/// Strips list markers such as `- `, `* ` and `3. ` from a reply line.
pub(crate) fn strip_list_marker(line: &str) -> &str {
    let line = line.trim();
    let line = line
        .strip_prefix("- ")
        .or_else(|| line.strip_prefix("* "))
        .unwrap_or(line);
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 {
        if let Some(rest) = line[digits..].strip_prefix(['.', ')']) {
            return rest.trim();
        }
    }
    line.trim()
}

enum Proposal {
    Done,
    Rough { verb: Verb, class: String },
    Concrete(ActionCommand),
    Rejected { text: String, reason: String },
}

fn read_proposal(reply: &str, agent: u32) -> Proposal {
    let line = reply
        .lines()
        .map(strip_list_marker)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    if line.eq_ignore_ascii_case("done") {
        return Proposal::Done;
    }
    if let Ok(mut cmd) = parse_command(line) {
        cmd.agent_index = agent;
        return Proposal::Concrete(cmd);
    }
    let mut words = line.split_whitespace();
    let Some(verb_word) = words.next() else {
        return Proposal::Rejected {
            text: line.to_string(),
            reason: "empty proposal".into(),
        };
    };
    let class = words.collect::<Vec<_>>().join("_").to_lowercase();
    match verb_word.parse::<Verb>() {
        Ok(verb) if !class.is_empty() && class.chars().all(is_class_char) => {
            Proposal::Rough { verb, class }
        }
        Ok(_) => Proposal::Rejected {
            text: line.to_string(),
            reason: "missing or malformed item".into(),
        },
        Err(e) => Proposal::Rejected {
            text: line.to_string(),
            reason: e.to_string(),
        },
    }
}

/// Asks for the next command of `activity`.
pub fn next_action(
    activity: &str,
    executed: &[ActionCommand],
    forbidden: &mut ForbiddenSet,
    env: &EnvironmentSnapshot,
    gateway: &Gateway,
    agent: u32,
) -> Result<NextAction, PipelineError> {
    if activity.trim().is_empty() {
        return Err(PipelineError::EmptyActivity);
    }
    let step = executed.len();
    let classes = env.class_names().into_iter().collect::<Vec<_>>().join(", ");
    for attempt in 0..MAX_PROPOSALS {
        let prompt = format!(
            "You are char{agent} at home, working on the activity \"{activity}\".\n\
             Interactive items: {classes}\n\
             Previously executed actions:\n{}\
             Forbidden actions (they failed before, do not repeat them):\n{}\
             Reply with the next action as a verb and an item, such as \"walk kitchen\" \
             or \"switchon tv\", or reply \"done\" if the activity is finished.",
            bullet_list(executed.iter().map(ActionCommand::render)),
            bullet_list(forbidden.iter().map(|(c, r)| format!("{c}: {r}"))),
        );
        let reply = gateway.complete(
            &PromptRequest::new(Category::PlanDecomposition, prompt)
                .key(format!("{activity}|{step}|{attempt}"))
                .agent(agent_label(agent)),
        )?;
        let cmd = match read_proposal(&reply.text, agent) {
            Proposal::Done => return Ok(NextAction::Done),
            Proposal::Concrete(cmd) => cmd,
            Proposal::Rejected { text, reason } => {
                forbidden.insert(text, reason);
                continue;
            }
            Proposal::Rough { verb, class } => {
                match resolve_item(activity, step, verb, &class, env, gateway, agent)? {
                    Some(id) => ActionCommand::new(agent, verb, class, id),
                    None => {
                        forbidden.insert(format!("{verb} {class}"), "no such item here");
                        continue;
                    }
                }
            }
        };
        if forbidden.contains(&cmd.render()) {
            log::debug!("rejecting forbidden proposal {cmd}");
            continue;
        }
        return Ok(NextAction::Command(cmd));
    }
    Err(PipelineError::ActivityStuck {
        activity: activity.to_string(),
        proposals: MAX_PROPOSALS,
    })
}

fn resolve_item(
    activity: &str,
    step: usize,
    verb: Verb,
    class: &str,
    env: &EnvironmentSnapshot,
    gateway: &Gateway,
    agent: u32,
) -> Result<Option<u32>, GatewayError> {
    let candidates: Vec<_> = env.items_of_class(class).collect();
    match candidates.as_slice() {
        [] => return Ok(None),
        [only] => return Ok(Some(only.id)),
        _ => {}
    }
    let prompt = format!(
        "You are char{agent} working on \"{activity}\" and want to {verb} a {class}.\n\
         These {class} items exist (id, location, state):\n{}\
         Reply with the id of the most appropriate one.",
        env.describe_items(candidates.iter().copied()),
    );
    let reply = gateway.complete(
        &PromptRequest::new(Category::PlanDecomposition, prompt)
            .key(format!("pick|{activity}|{step}|{class}"))
            .agent(agent_label(agent)),
    )?;
    let picked = reply
        .text
        .split(|c: char| !c.is_ascii_digit())
        .filter_map(|t| t.parse::<u32>().ok())
        .find(|id| candidates.iter().any(|c| c.id == *id));
    Ok(Some(picked.unwrap_or_else(|| {
        log::warn!(
            "unusable item pick {:?}; using {}",
            reply.text,
            candidates[0].id
        );
        candidates[0].id
    })))
}

/// Parses a yes/no verdict. `None` when the reply is neither.
pub fn parse_verdict(reply: &str) -> Option<bool> {
    let word: String = reply
        .trim()
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "yes" | "done" | "true" | "complete" | "completed" => Some(true),
        "no" | "not" | "false" | "incomplete" => Some(false),
        _ => None,
    }
}

/// Asks the critic whether `activity` is complete.
pub fn check_completion(
    activity: &str,
    executed: &[ActionCommand],
    env: &EnvironmentSnapshot,
    gateway: &Gateway,
    agent: u32,
) -> Result<bool, GatewayError> {
    if executed.is_empty() {
        return Ok(false);
    }
    let touched: BTreeSet<u32> = executed.iter().map(|c| c.item_id).collect();
    let prompt = format!(
        "Activity: \"{activity}\"\nActions taken so far:\n{}Current state of the items involved:\n{}\
         Has the activity been completed? Answer yes or no.",
        bullet_list(executed.iter().map(ActionCommand::render)),
        env.describe_items(env.items.iter().filter(|i| touched.contains(&i.id))),
    );
    let reply = gateway.complete(
        &PromptRequest::new(Category::Critic, prompt)
            .key(format!("{activity}|{}", executed.len()))
            .agent(agent_label(agent)),
    )?;
    Ok(parse_verdict(&reply.text).unwrap_or_else(|| {
        log::warn!(
            "unparseable critic verdict {:?}; treating as not done",
            reply.text
        );
        false
    }))
}

/// A goal the rule-based critic checks against the environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Goal {
    /// Some item of `class` is in `state`.
    ItemState {
        class: String,
        state: ItemState,
    },
    AgentIn {
        room: String,
    },
    Holding {
        class: String,
    },
    SittingOn {
        class: String,
    },
    LyingOn {
        class: String,
    },
}

/// Rule-based completion check: every scripted goal of the activity holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleCritic {
    pub goals: BTreeMap<String, Vec<Goal>>,
}

impl RuleCritic {
    pub fn is_done(
        &self,
        activity: &str,
        executed: &[ActionCommand],
        env: &EnvironmentSnapshot,
        agent: u32,
    ) -> bool {
        if executed.is_empty() {
            return false;
        }
        let Some(goals) = self.goals.get(activity) else {
            return false;
        };
        let class_of = |id: u32| env.item(id).map(|i| i.class.as_str());
        goals.iter().all(|goal| match goal {
            Goal::ItemState { class, state } => {
                env.items_of_class(class).any(|i| i.state == Some(*state))
            }
            Goal::AgentIn { room } => env.agent_positions.get(&agent) == Some(room),
            Goal::Holding { class } => env
                .held_items
                .get(&agent)
                .is_some_and(|held| held.iter().any(|&id| class_of(id) == Some(class))),
            Goal::SittingOn { class } => matches!(
                env.postures.get(&agent),
                Some(Posture::SittingOn(id)) if class_of(*id) == Some(class)
            ),
            Goal::LyingOn { class } => matches!(
                env.postures.get(&agent),
                Some(Posture::LyingOn(id)) if class_of(*id) == Some(class)
            ),
        })
    }
}

/// Which judge decides completion.
#[derive(Debug, Clone, Copy)]
pub enum Critic<'a> {
    Model,
    Rules(&'a RuleCritic),
}

/// Decomposes the day's target into an ordered activity list.
pub fn generate_activities(
    target: &str,
    env: &EnvironmentSnapshot,
    gateway: &Gateway,
    agent: u32,
) -> Result<Vec<String>, GatewayError> {
    let prompt = format!(
        "Your goal: {target}.\nThese are all the interactive items in the home:\n{}\
         List the activities you will do today, one per line, in order. Only plan \
         activities that can be carried out with these items.",
        env.describe_items(env.items.iter()),
    );
    let reply = gateway.complete(
        &PromptRequest::new(Category::PlanGeneration, prompt)
            .key(target)
            .agent(agent_label(agent)),
    )?;
    Ok(reply
        .text
        .lines()
        .map(strip_list_marker)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityOutcome {
    pub activity: String,
    pub success: bool,
    pub executed: Vec<ActionCommand>,
    pub forbidden: Vec<String>,
    pub failure: Option<String>,
}

/// Runs the plan → execute → critic loop for one activity.
///
/// Failed commands join the activity's forbidden set; the loop ends when the
/// critic reports completion, the plan module gets stuck, or [`MAX_STEPS`]
/// proposals have been made.
pub fn run_activity(
    activity: &str,
    env: &mut EnvironmentSnapshot,
    gateway: &Gateway,
    agent: u32,
    critic: Critic<'_>,
) -> Result<ActivityOutcome, GatewayError> {
    let mut executed = Vec::new();
    let mut forbidden = ForbiddenSet::new();
    let judge = |executed: &[ActionCommand], env: &EnvironmentSnapshot| match critic {
        Critic::Model => check_completion(activity, executed, env, gateway, agent),
        Critic::Rules(rules) => Ok(rules.is_done(activity, executed, env, agent)),
    };
    let mut failure = None;
    let mut success = false;
    for _ in 0..MAX_STEPS {
        match next_action(activity, &executed, &mut forbidden, env, gateway, agent) {
            Ok(NextAction::Done) => {
                success = judge(&executed, env)?;
                if !success {
                    failure = Some("planner stopped before the critic was satisfied".into());
                }
                break;
            }
            Ok(NextAction::Command(cmd)) => match env.execute(&cmd) {
                Ok(()) => {
                    executed.push(cmd);
                    if judge(&executed, env)? {
                        success = true;
                        break;
                    }
                }
                Err(e) => forbidden.insert(cmd.render(), e.to_string()),
            },
            Err(PipelineError::Gateway(e)) => return Err(e),
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    if !success && failure.is_none() {
        failure = Some(format!("no completion within {MAX_STEPS} steps"));
    }
    Ok(ActivityOutcome {
        activity: activity.to_string(),
        success,
        executed,
        forbidden: forbidden.iter().map(|(c, _)| c.to_string()).collect(),
        failure,
    })
}
