//! Cumulative distinct activities per agent over repeated runs.

use std::collections::BTreeSet;

use super::relmap::finish;
use super::ReportError;
use crate::sim::RunCounts;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityCurve {
    pub agents: Vec<String>,
    /// One row per run, one column per agent.
    pub rows: Vec<Vec<usize>>,
}

impl ActivityCurve {
    /// Agents missing from a run carry their previous count (0 before
    /// their first appearance).
    pub fn from_history(history: &[RunCounts]) -> Self {
        let agents: Vec<String> = history
            .iter()
            .flat_map(|r| r.cumulative.keys().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut last = vec![0; agents.len()];
        let rows = history
            .iter()
            .map(|run| {
                for (i, agent) in agents.iter().enumerate() {
                    if let Some(&c) = run.cumulative.get(agent) {
                        last[i] = c;
                    }
                }
                last.clone()
            })
            .collect();
        Self { agents, rows }
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a <= b))
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(std::iter::once("run").chain(self.agents.iter().map(String::as_str)))?;
        for (run, row) in self.rows.iter().enumerate() {
            w.write_record(
                std::iter::once((run + 1).to_string()).chain(row.iter().map(ToString::to_string)),
            )?;
        }
        finish(w)
    }

    pub fn parse_csv(text: &str) -> Result<Self, ReportError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.clone();
        if header.get(0) != Some("run") {
            return Err(ReportError::Format("first column must be \"run\"".into()));
        }
        let agents: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record?;
            if record.get(0) != Some((i + 1).to_string().as_str()) {
                return Err(ReportError::Format(format!(
                    "row {i} has the wrong run index"
                )));
            }
            let row = record
                .iter()
                .skip(1)
                .map(|c| {
                    c.parse()
                        .map_err(|_| ReportError::Format(format!("bad count {c:?}")))
                })
                .collect::<Result<Vec<usize>, _>>()?;
            rows.push(row);
        }
        Ok(Self { agents, rows })
    }
}
