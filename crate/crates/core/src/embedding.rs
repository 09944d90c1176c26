//! Text embeddings and cosine similarity.
//!
//! The default embedder is a hashed bag-of-tokens: text is split on anything
//! that is not alphanumeric, lowercased, each token is hashed into one of `D`
//! buckets, and the count vector is L2-normalized. It is fully deterministic
//! and needs no network, which keeps every simulation replayable. An external
//! embedding service can be swapped in through [`EmbedderMode::ExternalService`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DIMENSION: usize = 256;
pub const MIN_DIMENSION: usize = 8;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionError { left: usize, right: usize },
    #[error("embedding service unavailable: {0}")]
    EmbeddingUnavailable(String),
    #[error("invalid embedder config: {0}")]
    InvalidConfig(String),
}

/// A fixed-length real vector, L2-normalized when produced by an [`Embedder`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dimension: usize) -> Self {
        Self(vec![0.0; dimension])
    }

    /// Builds a vector and rescales it to unit length (zero stays zero).
    pub fn normalized(mut values: Vec<f64>) -> Self {
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|x| *x /= norm);
        }
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

/// Cosine similarity. A zero vector has similarity 0 with everything.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dimension() != b.dimension() {
        return Err(EmbeddingError::DimensionError {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.0.iter().zip(&b.0) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    // Symmetric in (a, b): every accumulator is commutative term by term.
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderMode {
    DeterministicHash,
    ExternalService,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub dimension: usize,
    pub mode: EmbedderMode,
    pub endpoint: Option<String>,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_DIMENSION,
            mode: EmbedderMode::DeterministicHash,
            endpoint: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Embedder {
    config: EmbedderConfig,
}

impl Embedder {
    pub fn new(config: EmbedderConfig) -> Result<Self, EmbeddingError> {
        if config.dimension < MIN_DIMENSION {
            return Err(EmbeddingError::InvalidConfig(format!(
                "dimension {} < {MIN_DIMENSION}",
                config.dimension
            )));
        }
        if config.mode == EmbedderMode::ExternalService && config.endpoint.is_none() {
            return Err(EmbeddingError::InvalidConfig(
                "external-service mode needs an endpoint".into(),
            ));
        }
        Ok(Self { config })
    }

    pub fn hashed(dimension: usize) -> Result<Self, EmbeddingError> {
        Self::new(EmbedderConfig {
            dimension,
            ..EmbedderConfig::default()
        })
    }

    pub fn dimension(&self) -> usize {
        self.config.dimension
    }

    pub fn config(&self) -> &EmbedderConfig {
        &self.config
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        match self.config.mode {
            EmbedderMode::DeterministicHash => Ok(self.embed_hashed(text)),
            EmbedderMode::ExternalService => self.embed_remote(text),
        }
    }

    fn embed_hashed(&self, text: &str) -> EmbeddingVector {
        let mut counts = vec![0.0; self.config.dimension];
        for token in tokenize(text) {
            let bucket = (fnv1a(token.as_bytes()) % self.config.dimension as u64) as usize;
            counts[bucket] += 1.0;
        }
        EmbeddingVector::normalized(counts)
    }

    fn embed_remote(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        if text.is_empty() {
            return Ok(EmbeddingVector::zeros(self.config.dimension));
        }
        let endpoint = self.config.endpoint.as_deref().unwrap_or_default();
        let response: RemoteEmbedding = ureq::post(endpoint)
            .send_json(serde_json::json!({ "input": text }))
            .map_err(|e| EmbeddingError::EmbeddingUnavailable(e.to_string()))?
            .into_json()
            .map_err(|e| EmbeddingError::EmbeddingUnavailable(e.to_string()))?;
        if response.embedding.len() != self.config.dimension {
            return Err(EmbeddingError::DimensionError {
                left: response.embedding.len(),
                right: self.config.dimension,
            });
        }
        Ok(EmbeddingVector::normalized(response.embedding))
    }
}

#[derive(Deserialize)]
struct RemoteEmbedding {
    embedding: Vec<f64>,
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}
