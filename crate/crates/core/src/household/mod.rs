//! Single-home simulation: item catalog, command grammar and the
//! target → activity → command pipeline.

pub mod command;
pub mod pipeline;
pub mod world;

pub use command::{parse_command, ActionCommand, CommandSyntaxError, UnknownVerb, Verb};
pub use pipeline::{
    check_completion, generate_activities, next_action, run_activity, ActivityOutcome, Critic,
    Goal, NextAction, PipelineError, RuleCritic,
};
pub use world::{
    EnvironmentSnapshot, ExecError, ForbiddenSet, Item, ItemClass, ItemState, Posture,
    Precondition, Property, WorldError,
};
