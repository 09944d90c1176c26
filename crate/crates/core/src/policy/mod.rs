//! Lifestyle policy: a store of plan → (condition, actions) graphs.
//!
//! A plan that has been decomposed and executed once is committed together
//! with the condition under which its actions ran. When a plan whose
//! embedding is within the similarity threshold of a stored one comes up
//! again, the stored actions are reused as long as the current environment
//! satisfies one of the record's conditions.
//!
//! Record order in the store doubles as recency: a hit moves its record to
//! the front, new records are appended at the back.

mod condition;
mod decompose;

use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use condition::{derive_condition, verb_property, ExecCondition, ItemPredicate};
pub use decompose::{decompose, Planner, ACTIONS_KEY_PREFIX};

use crate::embedding::{cosine, Embedder, EmbeddingError, EmbeddingVector};
use crate::gateway::GatewayError;
use crate::household::EnvironmentSnapshot;

pub const DEFAULT_THRESHOLD: f64 = 0.95;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("cannot decompose: {message} (line {line:?})")]
    DecompositionError { line: String, message: String },
    #[error("unknown verb {verb:?} in {line:?}")]
    UnknownVerb { verb: String, line: String },
    #[error("item class {0} is not in the catalog")]
    UnknownClass(String),
    #[error("policy store line {line}: {message}")]
    StoreFormatError { line: usize, message: String },
    #[error("invalid policy config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("policy store i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStoreConfig {
    pub similarity_threshold: f64,
    pub store_path: Option<PathBuf>,
}

impl Default for PolicyStoreConfig {
    fn default() -> Self {
        Self {
            similarity_threshold: DEFAULT_THRESHOLD,
            store_path: None,
        }
    }
}

impl PolicyStoreConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let t = self.similarity_threshold;
        if t > 0.0 && t <= 1.0 {
            Ok(())
        } else {
            Err(PolicyError::InvalidConfig(format!(
                "threshold {t} outside (0, 1]"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    #[serde(rename = "plan")]
    pub plan_text: String,
    pub embedding: EmbeddingVector,
    pub variants: Vec<ExecCondition>,
    pub created_at: u64,
    pub use_count: u64,
}

/// A successful lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHit {
    pub plan_text: String,
    pub similarity: f64,
    pub condition: ExecCondition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitOutcome {
    NewRecord,
    NewVariant,
    Duplicate,
}

#[derive(Debug, Clone)]
pub struct PolicyStore {
    config: PolicyStoreConfig,
    embedder: Embedder,
    records: Vec<PolicyRecord>,
}

impl PartialEq for PolicyStore {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl PolicyStore {
    pub fn new(config: PolicyStoreConfig, embedder: Embedder) -> Result<Self, PolicyError> {
        config.validate()?;
        Ok(Self {
            config,
            embedder,
            records: Vec::new(),
        })
    }

    /// A store over existing records, kept in the given (recency) order.
    pub fn from_records(
        config: PolicyStoreConfig,
        embedder: Embedder,
        records: Vec<PolicyRecord>,
    ) -> Result<Self, PolicyError> {
        let mut store = Self::new(config, embedder)?;
        store.records = records;
        Ok(store)
    }

    pub fn config(&self) -> &PolicyStoreConfig {
        &self.config
    }

    pub fn embedder(&self) -> &Embedder {
        &self.embedder
    }

    pub fn records(&self) -> &[PolicyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Candidate records for `plan_text` in the order lookup tries them:
    /// similarity descending, then used records by recency, then unused
    /// records by plan text.
    fn candidates(&self, query: &EmbeddingVector) -> Result<Vec<(usize, f64)>, PolicyError> {
        let mut found = Vec::new();
        for (idx, record) in self.records.iter().enumerate() {
            let sim = cosine(query, &record.embedding)?;
            if sim >= self.config.similarity_threshold {
                found.push((idx, sim));
            }
        }
        found.sort_by(|&(a, sa), &(b, sb)| {
            let (ra, rb) = (&self.records[a], &self.records[b]);
            sb.total_cmp(&sa)
                .then((ra.use_count == 0).cmp(&(rb.use_count == 0)))
                .then_with(|| {
                    if ra.use_count == 0 {
                        ra.plan_text.cmp(&rb.plan_text)
                    } else {
                        std::cmp::Ordering::Equal
                    }
                })
                .then(a.cmp(&b))
        });
        Ok(found)
    }

    /// Finds a stored variant usable for `plan_text` in `env` without
    /// changing the store. Returns (record index, variant index, similarity).
    pub fn peek(
        &self,
        plan_text: &str,
        env: &EnvironmentSnapshot,
    ) -> Result<Option<(usize, usize, f64)>, PolicyError> {
        let query = self.embedder.embed(plan_text)?;
        for (idx, sim) in self.candidates(&query)? {
            if let Some(v) = self.records[idx]
                .variants
                .iter()
                .position(|c| c.is_satisfied(env))
            {
                return Ok(Some((idx, v, sim)));
            }
        }
        Ok(None)
    }

    /// Looks up `plan_text`. On a hit the record's use count goes up, the
    /// record moves to the front and the matching variant to the front of
    /// its record.
    pub fn lookup(
        &mut self,
        plan_text: &str,
        env: &EnvironmentSnapshot,
    ) -> Result<Option<PolicyHit>, PolicyError> {
        let Some((idx, v, similarity)) = self.peek(plan_text, env)? else {
            return Ok(None);
        };
        let mut record = self.records.remove(idx);
        record.use_count += 1;
        let condition = record.variants.remove(v);
        record.variants.insert(0, condition.clone());
        let hit = PolicyHit {
            plan_text: record.plan_text.clone(),
            similarity,
            condition,
        };
        self.records.insert(0, record);
        Ok(Some(hit))
    }

    /// Stores `condition` under `plan_text`: as a new variant of the most
    /// similar record within the threshold, or as a new record.
    pub fn commit(
        &mut self,
        plan_text: &str,
        condition: ExecCondition,
        tick: u64,
    ) -> Result<CommitOutcome, PolicyError> {
        let embedding = self.embedder.embed(plan_text)?;
        if let Some(&(idx, _)) = self.candidates(&embedding)?.first() {
            let record = &mut self.records[idx];
            if record.variants.contains(&condition) {
                return Ok(CommitOutcome::Duplicate);
            }
            record.variants.push(condition);
            return Ok(CommitOutcome::NewVariant);
        }
        self.records.push(PolicyRecord {
            plan_text: plan_text.to_string(),
            embedding,
            variants: vec![condition],
            created_at: tick,
            use_count: 0,
        });
        Ok(CommitOutcome::NewRecord)
    }

    /// Writes one JSON record per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PolicyError> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        for record in &self.records {
            serde_json::to_writer(&mut out, record).map_err(io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a store written by [`PolicyStore::save`]. Blank lines are
    /// skipped; any other malformed line is an error naming its number.
    pub fn load(
        path: impl AsRef<Path>,
        config: PolicyStoreConfig,
        embedder: Embedder,
    ) -> Result<Self, PolicyError> {
        let file = io::BufReader::new(fs::File::open(path)?);
        let mut records = Vec::new();
        for (n, line) in file.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: PolicyRecord =
                serde_json::from_str(&line).map_err(|e| PolicyError::StoreFormatError {
                    line: n + 1,
                    message: e.to_string(),
                })?;
            let problem = if record.variants.is_empty() {
                Some("record has no variants".to_string())
            } else if record.embedding.dimension() != embedder.dimension() {
                Some(format!(
                    "embedding dimension {} != {}",
                    record.embedding.dimension(),
                    embedder.dimension()
                ))
            } else {
                None
            };
            if let Some(message) = problem {
                return Err(PolicyError::StoreFormatError {
                    line: n + 1,
                    message,
                });
            }
            records.push(record);
        }
        Self::from_records(config, embedder, records)
    }
}
