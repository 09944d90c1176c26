//! Plan → sub-plans → action commands through the gateway.

use super::PolicyError;
use crate::gateway::{Category, Gateway, PromptRequest};
use crate::household::pipeline::strip_list_marker;
use crate::household::{parse_command, ActionCommand, EnvironmentSnapshot, Verb};

/// Key prefix of the second (action conversion) request.
pub const ACTIONS_KEY_PREFIX: &str = "actions|";

/// Who is planning: the household agent index and the label usage is
/// attributed to.
#[derive(Debug, Clone, Copy)]
pub struct Planner<'a> {
    pub agent: u32,
    pub label: &'a str,
}

fn reply_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(strip_list_marker)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Breaks `plan_text` into sub-plans, then converts all sub-plans into
/// commands in one batched request.
///
/// Action lines may be full commands (`<char0> [grab] <mug> (20)`) or rough
/// `verb item` pairs. Rough items resolve to the lowest-id instance in the
/// room the agent will be in at that point, falling back to the lowest id
/// overall. Every referenced class must be present in `observation`.
pub fn decompose(
    plan_text: &str,
    observation: &EnvironmentSnapshot,
    gateway: &Gateway,
    planner: Planner<'_>,
) -> Result<(Vec<String>, Vec<ActionCommand>), PolicyError> {
    let plan = plan_text.trim();
    if plan.is_empty() {
        return Err(PolicyError::DecompositionError {
            line: String::new(),
            message: "empty plan".into(),
        });
    }
    let items = observation.describe_items(observation.items.iter());
    let first = gateway.complete(
        &PromptRequest::new(
            Category::PlanDecomposition,
            format!(
                "Break the plan \"{plan}\" into short sub-plans, one per line.\n\
                 Items you can interact with:\n{items}"
            ),
        )
        .key(plan)
        .agent(planner.label),
    )?;
    let sub_plans = reply_lines(&first.text);
    let second = gateway.complete(
        &PromptRequest::new(
            Category::PlanDecomposition,
            format!(
                "Convert each sub-plan into action commands, one per line, as \
                 \"verb item\" using only the items listed.\nSub-plans:\n{}\nItems:\n{items}",
                sub_plans.join("\n"),
            ),
        )
        .key(format!("{ACTIONS_KEY_PREFIX}{plan}"))
        .agent(planner.label),
    )?;
    let mut room = observation.agent_positions.get(&planner.agent).cloned();
    let mut actions = Vec::new();
    for line in reply_lines(&second.text) {
        let cmd = action_from_line(&line, observation, planner.agent, room.as_deref())?;
        if cmd.verb == Verb::Walk {
            room = observation.item(cmd.item_id).map(|i| i.room.clone());
        }
        actions.push(cmd);
    }
    if actions.is_empty() {
        return Err(PolicyError::DecompositionError {
            line: second.text,
            message: "no actions".into(),
        });
    }
    Ok((sub_plans, actions))
}

fn action_from_line(
    line: &str,
    env: &EnvironmentSnapshot,
    agent: u32,
    room: Option<&str>,
) -> Result<ActionCommand, PolicyError> {
    let bad = |message: &str| PolicyError::DecompositionError {
        line: line.to_string(),
        message: message.to_string(),
    };
    if line.trim_start().starts_with('<') {
        let mut cmd = parse_command(line).map_err(|e| bad(&e.to_string()))?;
        if !env
            .item(cmd.item_id)
            .is_some_and(|i| i.class == cmd.item_class)
        {
            return Err(bad("no such item in the observation"));
        }
        cmd.agent_index = agent;
        return Ok(cmd);
    }
    let mut words = line.split_whitespace();
    let verb_word = words.next().ok_or_else(|| bad("empty line"))?;
    let verb: Verb = verb_word.parse().map_err(|_| PolicyError::UnknownVerb {
        verb: verb_word.to_string(),
        line: line.to_string(),
    })?;
    let class = words.collect::<Vec<_>>().join("_").to_lowercase();
    if class.is_empty() {
        return Err(bad("missing item"));
    }
    let mut candidates: Vec<_> = env.items_of_class(&class).collect();
    if candidates.is_empty() {
        return Err(bad(&format!("item class {class} is not in the catalog")));
    }
    candidates.sort_by_key(|i| (Some(i.room.as_str()) != room, i.id));
    let id = candidates[0].id;
    Ok(ActionCommand::new(agent, verb, class, id))
}
