//! Distinct-activity tracking across runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, Embedder, EmbeddingError, EmbeddingVector};

/// Activities at least this similar count as the same type.
pub const ACTIVITY_IDENTITY_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCounts {
    pub new: usize,
    /// Distinct activity types per agent after this run.
    pub cumulative: BTreeMap<String, usize>,
}

/// Canonical activity types per agent, accumulated over runs.
#[derive(Debug, Clone, Default)]
pub struct ActivityLedger {
    embedder: Embedder,
    canonical: BTreeMap<String, Vec<(String, EmbeddingVector)>>,
    history: Vec<RunCounts>,
}

impl ActivityLedger {
    pub fn new(embedder: Embedder) -> Self {
        Self {
            embedder,
            ..Default::default()
        }
    }

    /// Adds one run's activities. An activity is new when its similarity to
    /// every canonical activity of the same agent is below the threshold.
    /// Returns the number of new activities.
    pub fn track(&mut self, run: &BTreeMap<String, Vec<String>>) -> Result<usize, EmbeddingError> {
        let mut new = 0;
        for (agent, activities) in run {
            let known = self.canonical.entry(agent.clone()).or_default();
            for activity in activities {
                let v = self.embedder.embed(activity)?;
                let mut seen = false;
                for (_, k) in known.iter() {
                    if cosine(&v, k)? >= ACTIVITY_IDENTITY_THRESHOLD {
                        seen = true;
                        break;
                    }
                }
                if !seen {
                    known.push((activity.clone(), v));
                    new += 1;
                }
            }
        }
        let mut cumulative: BTreeMap<String, usize> = self
            .history
            .last()
            .map(|r| r.cumulative.clone())
            .unwrap_or_default();
        for (agent, known) in &self.canonical {
            cumulative.insert(agent.clone(), known.len());
        }
        self.history.push(RunCounts { new, cumulative });
        Ok(new)
    }

    pub fn history(&self) -> &[RunCounts] {
        &self.history
    }

    pub fn cumulative(&self) -> usize {
        self.canonical.values().map(Vec::len).sum()
    }

    pub fn canonical(&self, agent: &str) -> impl Iterator<Item = &str> {
        self.canonical
            .get(agent)
            .into_iter()
            .flatten()
            .map(|(a, _)| a.as_str())
    }
}

/// Tracks `run` in `ledger` and returns the new-activity count.
pub fn track_activities(
    ledger: &mut ActivityLedger,
    run: &BTreeMap<String, Vec<String>>,
) -> Result<usize, EmbeddingError> {
    ledger.track(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(items: &[(&str, &[&str])]) -> BTreeMap<String, Vec<String>> {
        items
            .iter()
            .map(|(a, acts)| (a.to_string(), acts.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    #[test]
    fn first_run_counts_distinct_then_plateaus() {
        let mut l = ActivityLedger::default();
        let r = run(&[
            (
                "KM",
                &["have breakfast", "study chemistry", "have breakfast"],
            ),
            ("ML", &["paint a landscape"]),
        ]);
        assert_eq!(track_activities(&mut l, &r).unwrap(), 3);
        assert_eq!(track_activities(&mut l, &r).unwrap(), 0);
        assert_eq!(l.cumulative(), 3);
        assert_eq!(l.history()[1].cumulative["KM"], 2);
    }

    #[test]
    fn near_duplicates_are_the_same_type() {
        let mut l = ActivityLedger::default();
        track_activities(&mut l, &run(&[("a", &["Have breakfast."])])).unwrap();
        assert_eq!(
            track_activities(&mut l, &run(&[("a", &["have breakfast"])])).unwrap(),
            0
        );
        assert_eq!(
            track_activities(&mut l, &run(&[("a", &["have a big breakfast"])])).unwrap(),
            1
        );
    }

    #[test]
    fn cumulative_never_decreases() {
        let mut l = ActivityLedger::default();
        track_activities(&mut l, &run(&[("a", &["x one"]), ("b", &["y two"])])).unwrap();
        track_activities(&mut l, &run(&[("a", &["z three"])])).unwrap();
        let h = l.history();
        assert_eq!(h[1].cumulative["b"], 1);
        assert_eq!(h[1].cumulative["a"], 2);
    }
}
