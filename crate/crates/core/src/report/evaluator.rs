//! Believability questionnaires for a judge model.

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::sim::{DialogueRecord, ScheduleEntry};

pub const ACTIVITY_HEADER: &str = "Please evaluate the following daily activities of an agent and determine whether it is generated by a Large Language Model(LLM) AI or a real human: ";
pub const ACTIVITY_FORMAT_LINE: &str = "The activities will be printed in the format of \"time:current plan(The specific actions, if there are any)\":";
pub const DIALOGUE_HEADER: &str = "Please evaluate the following dialogue of an agent and determine whether it is generated by a Large Language Model(LLM) AI or a real human: ";
pub const DIALOGUE_LABEL: &str = "The dialogue:";
pub const SCALE_CLAUSE: &str =
    "Please rate on a scale of 1 to 5, with 1 being most like an AI and 5 being most like a human.";
pub const JSON_CLAUSE: &str = "Please strictly follow the JSON format for your response:";
pub const JSON_SKELETON: &str = "{\n    \"reason\": <str>,\n    \"score\": <int>\n}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    Activity,
    Dialogue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluatorPrompt {
    pub kind: EvaluatorKind,
    /// Agent whose schedule is rated, or the dialogue's opener.
    pub subject: String,
    pub body: String,
}

pub enum EvaluatorInput<'a> {
    Schedule(&'a [ScheduleEntry]),
    Dialogue(&'a DialogueRecord),
}

/// `time:plan(action,action)`; the parenthesis is left out without actions.
pub fn activity_line(entry: &ScheduleEntry) -> String {
    let mut line = format!("{}:{}", entry.time, entry.activity);
    if !entry.actions.is_empty() {
        let actions: Vec<String> = entry.actions.iter().map(ToString::to_string).collect();
        line.push_str(&format!("({})", actions.join(",")));
    }
    line
}

pub fn build_evaluator_prompt(input: EvaluatorInput<'_>) -> Result<EvaluatorPrompt, ReportError> {
    let (kind, subject, mut body) = match input {
        EvaluatorInput::Schedule(entries) => {
            let first = entries.first().ok_or(ReportError::EmptyInput)?;
            let mut body = format!("{ACTIVITY_HEADER}\n\n{ACTIVITY_FORMAT_LINE}\n");
            for entry in entries {
                body.push_str(&format!("    - {}\n", activity_line(entry)));
            }
            (EvaluatorKind::Activity, first.agent.clone(), body)
        }
        EvaluatorInput::Dialogue(record) => {
            if record.turns.is_empty() {
                return Err(ReportError::EmptyInput);
            }
            let mut body = format!(
                "{DIALOGUE_HEADER}\n\n{DIALOGUE_LABEL}\n\n{}:chat with {}, message:\n",
                record.time, record.b
            );
            for turn in &record.turns {
                body.push_str(&format!("    - {}:{}\n", turn.speaker, turn.text));
            }
            (EvaluatorKind::Dialogue, record.a.clone(), body)
        }
    };
    body.push_str(&format!(
        "\n{SCALE_CLAUSE}\n\n{JSON_CLAUSE}\n{JSON_SKELETON}\n"
    ));
    Ok(EvaluatorPrompt {
        kind,
        subject,
        body,
    })
}
