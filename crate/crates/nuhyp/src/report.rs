//! Report records shared by the experiments and the CLI: checks against
//! thresholds and self-describing numeric tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The measured quantity, when a single number summarizes it.
    pub value: Option<f64>,
    /// The threshold as stated, e.g. `"≤ 1e-10"`.
    pub threshold: String,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, value: Option<f64>, threshold: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            threshold: threshold.into(),
            detail: String::new(),
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value <= bound, Some(value), format!("≤ {:e}", bound))
    }

    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value < bound, Some(value), format!("< {:e}", bound))
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Text(String::new()), Cell::Float)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(f) if f.is_finite() => format!("{:.16e}", f),
            Cell::Float(f) => f.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Truncations, thresholds and parameters needed to read the table.
    pub metadata: BTreeMap<String, String>,
}

impl Table {
    /// `columns` as `(name, unit)` pairs; use `"1"` for dimensionless.
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.into(),
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: (*n).into(),
                    unit: (*u).into(),
                })
                .collect(),
            rows: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    /// CSV with `# key: value` metadata lines and `name [unit]` headers.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out += &format!("# {}: {}\n", k, v);
        }
        let header: Vec<String> = self.columns.iter().map(|c| format!("{} [{}]", c.name, c.unit)).collect();
        out += &header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out += &cells.join(",");
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Extra records (partitions, fixed-point data) keyed by name.
    pub records: BTreeMap<String, serde_json::Value>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, checks: Vec<Check>, tables: Vec<Table>) -> Self {
        Self {
            experiment: experiment.into(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            tables,
            records: BTreeMap::new(),
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Writes `<experiment>_summary.json` and one CSV per table; returns the
    /// paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let summary = dir.join(format!("{}_summary.json", self.experiment));
        io::write_json(&summary, self)?;
        written.push(summary);
        for t in &self.tables {
            let path = dir.join(format!("{}_{}.csv", self.experiment, t.name));
            io::write_text(&path, &t.to_csv())?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_units_and_metadata() {
        let mut t = Table::new("d", &[("eps", "1"), ("D", "1")]).meta("K", 35);
        t.push(vec![0.01.into(), 0.5.into()]);
        let csv = t.to_csv();
        assert!(csv.starts_with("# K: 35\neps [1],D [1]\n1.0000000000000000e-2,"));
    }
}
