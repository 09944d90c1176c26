//! The single choke point for model calls.
//!
//! Every prompt goes through [`Gateway::complete`], which dispatches to a
//! [`Backend`] and appends the call's token usage to a ledger. The ledger is
//! what the ablation tables and cost reports are built from.

mod http;
mod mock;
mod score;

pub use http::HttpBackend;
pub use mock::{MockBackend, ScriptEntry};
pub use score::{parse_score_response, ScoreError};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_TOKENS: u32 = 512;

/// Call-site category, used for cost attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    PlanGeneration,
    PlanDecomposition,
    ConditionDerivation,
    DialogueTurn,
    DialogueUpdate,
    SummaryCompression,
    Critic,
    Reflection,
    Evaluator,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::PlanGeneration,
        Category::PlanDecomposition,
        Category::ConditionDerivation,
        Category::DialogueTurn,
        Category::DialogueUpdate,
        Category::SummaryCompression,
        Category::Critic,
        Category::Reflection,
        Category::Evaluator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::PlanGeneration => "plan_generation",
            Category::PlanDecomposition => "plan_decomposition",
            Category::ConditionDerivation => "condition_derivation",
            Category::DialogueTurn => "dialogue_turn",
            Category::DialogueUpdate => "dialogue_update",
            Category::SummaryCompression => "summary_compression",
            Category::Critic => "critic",
            Category::Reflection => "reflection",
            Category::Evaluator => "evaluator",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no mock script entry for ({category}, {key:?})")]
    ScriptMiss { category: Category, key: String },
    #[error("backend error: {0}")]
    BackendError(String),
    #[error("cannot load mock script: {0}")]
    ScriptLoad(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptRequest {
    pub category: Category,
    pub prompt: String,
    /// Lookup key for scripted backends; ignored by live models.
    pub scenario_key: String,
    pub max_tokens: u32,
    /// Requesting agent, for per-agent cost attribution.
    pub agent: Option<String>,
}

impl PromptRequest {
    pub fn new(category: Category, prompt: impl Into<String>) -> Self {
        Self {
            category,
            prompt: prompt.into(),
            scenario_key: String::new(),
            max_tokens: DEFAULT_MAX_TOKENS,
            agent: None,
        }
    }

    pub fn key(mut self, key: impl Into<String>) -> Self {
        self.scenario_key = key.into();
        self
    }

    pub fn agent(mut self, agent: impl Into<String>) -> Self {
        self.agent = Some(agent.into());
        self
    }

    pub fn max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub category: Category,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionResult {
    pub text: String,
    pub usage: TokenUsage,
}

/// Token estimate used wherever no provider count exists: ceil(chars / 4).
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &PromptRequest) -> Result<CompletionResult, GatewayError>;

    /// Whether transport failures are worth one retry.
    fn retryable(&self) -> bool {
        false
    }
}

/// One ledger line per completed call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub seq: u64,
    pub category: Category,
    pub agent: Option<String>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl UsageRecord {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTotals {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total: u64,
}

impl TokenTotals {
    fn add(&mut self, record: &UsageRecord) {
        self.calls += 1;
        self.prompt_tokens += record.prompt_tokens;
        self.completion_tokens += record.completion_tokens;
        self.total += record.total();
    }
}

/// Agent key used for calls without an attributed agent.
pub const UNATTRIBUTED: &str = "-";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageReport {
    pub by_category: BTreeMap<Category, TokenTotals>,
    pub by_agent: BTreeMap<String, TokenTotals>,
    pub total: TokenTotals,
}

impl UsageReport {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a UsageRecord>) -> Self {
        let mut report = UsageReport {
            by_category: Category::ALL
                .iter()
                .map(|&c| (c, TokenTotals::default()))
                .collect(),
            ..Default::default()
        };
        for record in records {
            report.total.add(record);
            report
                .by_category
                .entry(record.category)
                .or_default()
                .add(record);
            let agent = record.agent.as_deref().unwrap_or(UNATTRIBUTED);
            report
                .by_agent
                .entry(agent.to_string())
                .or_default()
                .add(record);
        }
        report
    }

    pub fn category(&self, category: Category) -> TokenTotals {
        self.by_category.get(&category).copied().unwrap_or_default()
    }
}

pub struct Gateway {
    backend: Box<dyn Backend>,
    ledger: Mutex<Vec<UsageRecord>>,
    retries: u32,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("calls", &self.ledger.lock().unwrap().len())
            .field("retries", &self.retries)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(backend: impl Backend + 'static) -> Self {
        Self {
            backend: Box::new(backend),
            ledger: Mutex::new(Vec::new()),
            retries: 1,
        }
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn complete(&self, request: &PromptRequest) -> Result<CompletionResult, GatewayError> {
        if request.prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        if request.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        let mut attempt = 0;
        let result = loop {
            match self.backend.complete(request) {
                Err(GatewayError::BackendError(e))
                    if self.backend.retryable() && attempt < self.retries =>
                {
                    log::warn!("backend error on {}, retrying: {e}", request.category);
                    attempt += 1;
                }
                other => break other?,
            }
        };
        let mut ledger = self.ledger.lock().unwrap();
        let seq = ledger.len() as u64;
        ledger.push(UsageRecord {
            seq,
            category: request.category,
            agent: request.agent.clone(),
            prompt_tokens: result.usage.prompt_tokens,
            completion_tokens: result.usage.completion_tokens,
        });
        Ok(result)
    }

    pub fn usage_report(&self) -> UsageReport {
        UsageReport::from_records(self.ledger.lock().unwrap().iter())
    }

    pub fn records(&self) -> Vec<UsageRecord> {
        self.ledger.lock().unwrap().clone()
    }

    pub fn calls(&self, category: Category) -> u64 {
        self.ledger
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.category == category)
            .count() as u64
    }

    pub fn call_count(&self) -> usize {
        self.ledger.lock().unwrap().len()
    }
}
