//! Pairwise relationship scores as a square CSV matrix.

use std::collections::BTreeMap;

use super::ReportError;
use crate::sim::SimulationReport;

/// Symmetric score matrix; the diagonal is `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationshipMap {
    pub initials: Vec<String>,
    pub cells: Vec<Vec<Option<u8>>>,
}

impl RelationshipMap {
    /// Pairs without a dyad score 0.
    pub fn from_report(report: &SimulationReport) -> Self {
        let index: BTreeMap<&str, usize> = report
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| (a.name.as_str(), i))
            .collect();
        let n = report.agents.len();
        let mut cells = vec![vec![Some(0); n]; n];
        for (i, row) in cells.iter_mut().enumerate() {
            row[i] = None;
        }
        for dyad in &report.dyads {
            if let (Some(&i), Some(&j)) = (index.get(dyad.a.as_str()), index.get(dyad.b.as_str())) {
                cells[i][j] = Some(dyad.score);
                cells[j][i] = Some(dyad.score);
            }
        }
        Self {
            initials: report.agents.iter().map(|a| a.initials.clone()).collect(),
            cells,
        }
    }

    pub fn get(&self, a: &str, b: &str) -> Option<u8> {
        let i = self.initials.iter().position(|x| x == a)?;
        let j = self.initials.iter().position(|x| x == b)?;
        self.cells[i][j]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.cells.len();
        (0..n).all(|i| (0..n).all(|j| self.cells[i][j] == self.cells[j][i]))
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(std::iter::once("").chain(self.initials.iter().map(String::as_str)))?;
        for (name, row) in self.initials.iter().zip(&self.cells) {
            let cells = row
                .iter()
                .map(|c| c.map(|v| v.to_string()).unwrap_or_default());
            w.write_record(std::iter::once(name.clone()).chain(cells))?;
        }
        finish(w)
    }

    pub fn parse_csv(text: &str) -> Result<Self, ReportError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(text.as_bytes());
        let mut rows = r.records();
        let header = rows
            .next()
            .ok_or_else(|| ReportError::Format("empty relationship map".into()))??;
        let initials: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut cells = Vec::new();
        for (i, row) in rows.enumerate() {
            let row = row?;
            if row.get(0) != initials.get(i).map(String::as_str) {
                return Err(ReportError::Format(format!(
                    "row {i} label does not match the header"
                )));
            }
            let parsed = row
                .iter()
                .skip(1)
                .map(|c| match c {
                    "" => Ok(None),
                    v => v
                        .parse()
                        .map(Some)
                        .map_err(|_| ReportError::Format(format!("bad score {v:?}"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if parsed.len() != initials.len() {
                return Err(ReportError::Format(format!(
                    "row {i} has {} cells",
                    parsed.len()
                )));
            }
            cells.push(parsed);
        }
        if cells.len() != initials.len() {
            return Err(ReportError::Format("matrix is not square".into()));
        }
        Ok(Self { initials, cells })
    }
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w
        .into_inner()
        .map_err(|e| ReportError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ReportError::Format(e.to_string()))
}
