//! Per-agent event memory: scored retrieval, DBSCAN clustering of event
//! embeddings and cluster-weighted "mind wandering" sampling.

mod dbscan;

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dbscan::{dbscan, partition};

use crate::embedding::{cosine, Embedder, EmbeddingError, EmbeddingVector};

pub const RECENCY_DECAY: f64 = 0.995;
pub const DEFAULT_EPS: f64 = 0.3;
pub const DEFAULT_MIN_PTS: usize = 2;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("importance {0} outside [1, 10]")]
    RangeError(u8),
    #[error("top_k must be at least 1")]
    InvalidTopK,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEvent {
    pub id: u64,
    pub text: String,
    pub tick: u64,
    pub importance: u8,
    #[serde(skip)]
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub eps: f64,
    pub min_pts: usize,
    /// Events containing any of these words are left out of clustering.
    pub idle_blocklist: Vec<String>,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            min_pts: DEFAULT_MIN_PTS,
            idle_blocklist: vec!["idle".into()],
        }
    }
}

/// An event with its retrieval score.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored<'a> {
    pub event: &'a MemoryEvent,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct AgentMemory {
    embedder: Embedder,
    config: MemoryConfig,
    events: Vec<MemoryEvent>,
    next_id: u64,
}

impl AgentMemory {
    pub fn new(embedder: Embedder, config: MemoryConfig) -> Self {
        Self {
            embedder,
            config,
            events: Vec::new(),
            next_id: 0,
        }
    }

    pub fn events(&self) -> &[MemoryEvent] {
        &self.events
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    pub fn embedder(&self) -> &Embedder {
        &self.embedder
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&MemoryEvent> {
        self.events.iter().find(|e| e.id == id)
    }

    pub fn add_event(
        &mut self,
        text: impl Into<String>,
        tick: u64,
        importance: u8,
    ) -> Result<&MemoryEvent, MemoryError> {
        if !(1..=10).contains(&importance) {
            return Err(MemoryError::RangeError(importance));
        }
        let text = text.into();
        let embedding = self.embedder.embed(&text)?;
        self.events.push(MemoryEvent {
            id: self.next_id,
            text,
            tick,
            importance,
            embedding,
        });
        self.next_id += 1;
        Ok(self.events.last().expect("just pushed"))
    }

    /// Scores every event against `query` at time `now`.
    ///
    /// Recency `0.995^(now - tick)`, importance `/10` and relevance
    /// `max(0, cos)` are each min-max normalized over the store and summed.
    /// A component that is constant over the store normalizes to 0.5.
    pub fn score_all(&self, query: &str, now: u64) -> Result<Vec<Scored<'_>>, MemoryError> {
        let q = self.embedder.embed(query)?;
        let mut raw = Vec::with_capacity(self.events.len());
        for e in &self.events {
            let recency = RECENCY_DECAY.powf(now.saturating_sub(e.tick) as f64);
            let importance = f64::from(e.importance) / 10.0;
            let relevance = cosine(&q, &e.embedding)?.max(0.0);
            raw.push([recency, importance, relevance]);
        }
        let mut scores = vec![0.0; raw.len()];
        for c in 0..3 {
            let (lo, hi) = raw
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[c]), hi.max(r[c]))
                });
            for (s, r) in scores.iter_mut().zip(&raw) {
                *s += if hi > lo {
                    (r[c] - lo) / (hi - lo)
                } else {
                    0.5
                };
            }
        }
        Ok(self
            .events
            .iter()
            .zip(scores)
            .map(|(event, score)| Scored { event, score })
            .collect())
    }

    /// The `top_k` highest-scoring events; ties go to the newer tick, then the
    /// lower id.
    pub fn retrieve(
        &self,
        query: &str,
        top_k: usize,
        now: u64,
    ) -> Result<Vec<&MemoryEvent>, MemoryError> {
        if top_k == 0 {
            return Err(MemoryError::InvalidTopK);
        }
        let mut scored = self.score_all(query, now)?;
        scored.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(b.event.tick.cmp(&a.event.tick))
                .then(a.event.id.cmp(&b.event.id))
        });
        Ok(scored.into_iter().take(top_k).map(|s| s.event).collect())
    }

    /// Events eligible for clustering: those without a blocklisted word.
    pub fn active_events(&self) -> Vec<&MemoryEvent> {
        self.events
            .iter()
            .filter(|e| !is_blocked(&e.text, &self.config.idle_blocklist))
            .collect()
    }

    pub fn cluster(&self) -> EventClustering {
        cluster(&self.active_events(), self.config.eps, self.config.min_pts)
    }

    /// JSON Lines of `{"id", "text", "tick", "importance"}`.
    pub fn export_jsonl(&self, mut out: impl Write) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn is_blocked(text: &str, blocklist: &[String]) -> bool {
    crate::embedding::tokenize(text).any(|t| blocklist.iter().any(|b| b.eq_ignore_ascii_case(&t)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventClustering {
    /// Event ids per cluster, ordered by first member.
    pub clusters: Vec<Vec<u64>>,
    pub eps: f64,
    pub min_pts: usize,
}

impl EventClustering {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// `p = 1 / (k |C_i|)` for every event of cluster `C_i`.
    pub fn distribution(&self) -> BTreeMap<u64, f64> {
        let k = self.k() as f64;
        self.clusters
            .iter()
            .flat_map(|c| {
                let p = 1.0 / (k * c.len() as f64);
                c.iter().map(move |&id| (id, p))
            })
            .collect()
    }

    /// Endless stream of independent draws, seeded.
    pub fn sampler(&self, seed: u64) -> WanderSampler<'_> {
        WanderSampler {
            clusters: &self.clusters,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Clusters `events` by DBSCAN on their embeddings, noise as singletons.
pub fn cluster(events: &[&MemoryEvent], eps: f64, min_pts: usize) -> EventClustering {
    let points: Vec<&EmbeddingVector> = events.iter().map(|e| &e.embedding).collect();
    let clusters = partition(&dbscan(&points, eps, min_pts))
        .into_iter()
        .map(|g| g.into_iter().map(|i| events[i].id).collect())
        .collect();
    EventClustering {
        clusters,
        eps,
        min_pts,
    }
}

/// Draws event ids: a cluster uniformly, then a member uniformly, which is
/// exactly `1 / (k |C_i|)` per event.
#[derive(Debug, Clone)]
pub struct WanderSampler<'a> {
    clusters: &'a [Vec<u64>],
    rng: ChaCha8Rng,
}

impl Iterator for WanderSampler<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.clusters.is_empty() {
            return None;
        }
        let c = &self.clusters[self.rng.gen_range(0..self.clusters.len())];
        Some(c[self.rng.gen_range(0..c.len())])
    }
}

/// `m` independent draws (with replacement).
pub fn mind_wander_sample(clustering: &EventClustering, m: usize, seed: u64) -> Vec<u64> {
    clustering.sampler(seed).take(m).collect()
}
