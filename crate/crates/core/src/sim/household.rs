//! One household day: target → activities → commands, with policy reuse.

use serde::{Deserialize, Serialize};

use super::town::PlanSource;
use super::{PolicyStats, SimError};
use crate::gateway::{Gateway, GatewayError, UsageReport};
use crate::household::{
    generate_activities, run_activity, ActionCommand, ActivityOutcome, Critic, EnvironmentSnapshot,
};
use crate::policy::{derive_condition, CommitOutcome, PolicyStore};
use crate::scenario::{CriticKind, HouseholdScenario};

const AGENT: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseholdActivity {
    #[serde(flatten)]
    pub outcome: ActivityOutcome,
    pub source: PlanSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdReport {
    pub scenario: String,
    pub target: String,
    pub activities: Vec<HouseholdActivity>,
    pub completion_rate: f64,
    pub tokens: UsageReport,
    pub policy: PolicyStats,
    pub final_state: EnvironmentSnapshot,
}

impl HouseholdReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    pub fn executed(&self) -> impl Iterator<Item = &ActionCommand> {
        self.activities.iter().flat_map(|a| &a.outcome.executed)
    }
}

/// Replays a stored plan from `env`; stops at the first failing command.
fn replay(
    label: &str,
    actions: Vec<ActionCommand>,
    env: &mut EnvironmentSnapshot,
) -> ActivityOutcome {
    let mut executed = Vec::new();
    let mut failure = None;
    for cmd in actions {
        match env.execute(&cmd) {
            Ok(()) => executed.push(cmd),
            Err(e) => {
                failure = Some(format!("stored action {cmd} failed: {e}"));
                break;
            }
        }
    }
    ActivityOutcome {
        activity: label.to_string(),
        success: failure.is_none(),
        executed,
        forbidden: Vec::new(),
        failure,
    }
}

/// Looks `text` up in the store and replays the bound actions on a hit.
fn try_reuse(
    text: &str,
    env: &mut EnvironmentSnapshot,
    store: &mut PolicyStore,
    stats: &mut PolicyStats,
) -> Result<Option<ActivityOutcome>, SimError> {
    let Some(hit) = store.lookup(text, env)? else {
        stats.misses += 1;
        return Ok(None);
    };
    let Some(actions) = hit.condition.bind(env, AGENT) else {
        stats.misses += 1;
        return Ok(None);
    };
    stats.hits += 1;
    Ok(Some(replay(text, actions, env)))
}

/// Runs the scenario's day once.
///
/// With a store, the whole target is tried first and replayed without model
/// calls on a hit. Otherwise each activity is looked up before planning it,
/// successful activities are committed, and a fully successful day is
/// committed under the target as well.
pub fn run_household_day(
    scenario: &HouseholdScenario,
    gateway: &Gateway,
    mut policy: Option<&mut PolicyStore>,
) -> Result<HouseholdReport, SimError> {
    let mut env = scenario.world()?;
    let start = env.clone();
    let mut stats = PolicyStats::default();
    let critic = match scenario.critic {
        CriticKind::Model => Critic::Model,
        CriticKind::Rules => Critic::Rules(&scenario.goals),
    };
    let mut activities = Vec::new();

    let whole_day = match policy.as_deref_mut() {
        Some(store) => try_reuse(&scenario.target, &mut env, store, &mut stats)?,
        None => None,
    };
    if let Some(outcome) = whole_day {
        activities.push(HouseholdActivity {
            outcome,
            source: PlanSource::Policy,
        });
    } else {
        for activity in generate_activities(&scenario.target, &env, gateway, AGENT)? {
            let before = env.clone();
            let reused = match policy.as_deref_mut() {
                Some(store) => try_reuse(&activity, &mut env, store, &mut stats)?,
                None => None,
            };
            let (outcome, source) = match reused {
                Some(outcome) => (outcome, PlanSource::Policy),
                None => match run_activity(&activity, &mut env, gateway, AGENT, critic) {
                    Ok(outcome) => (outcome, PlanSource::Generated),
                    Err(e @ GatewayError::BackendError(_)) => return Err(e.into()),
                    Err(e) => (
                        ActivityOutcome {
                            activity: activity.clone(),
                            success: false,
                            executed: Vec::new(),
                            forbidden: Vec::new(),
                            failure: Some(e.to_string()),
                        },
                        PlanSource::Failed,
                    ),
                },
            };
            if let (Some(store), true, PlanSource::Generated) =
                (policy.as_deref_mut(), outcome.success, &source)
            {
                let condition = derive_condition(&outcome.executed, &before)?;
                if store.commit(&activity, condition, 0)? != CommitOutcome::Duplicate {
                    stats.commits += 1;
                }
            }
            activities.push(HouseholdActivity { outcome, source });
        }
        let all_ok = !activities.is_empty() && activities.iter().all(|a| a.outcome.success);
        if let (Some(store), true) = (policy, all_ok) {
            let day: Vec<ActionCommand> = activities
                .iter()
                .flat_map(|a| a.outcome.executed.iter().cloned())
                .collect();
            let condition = derive_condition(&day, &start)?;
            if store.commit(&scenario.target, condition, 0)? != CommitOutcome::Duplicate {
                stats.commits += 1;
            }
        }
    }

    let done = activities.iter().filter(|a| a.outcome.success).count();
    let completion_rate = if activities.is_empty() {
        0.0
    } else {
        done as f64 / activities.len() as f64
    };
    Ok(HouseholdReport {
        scenario: scenario.name.clone(),
        target: scenario.target.clone(),
        activities,
        completion_rate,
        tokens: gateway.usage_report(),
        policy: stats,
        final_state: env,
    })
}
