//! `trajectory.csv` and `summary.json` writers.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rows of a CSV file under a fixed header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push_numbers(&mut self, row: impl IntoIterator<Item = f64>) {
        let row: Vec<String> = row.into_iter().map(num).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Sample times must be strictly increasing.
pub fn check_times(times: &[f64]) -> Result<(), String> {
    match times.windows(2).position(|w| !(w[1] > w[0])) {
        Some(k) => Err(format!("sample times not increasing at row {}: {} then {}", k + 1, times[k], times[k + 1])),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<crate::config::Violation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub code_version: &'static str,
    pub command: String,
    pub seed: u64,
    pub status: &'static str,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
    pub results: Value,
    pub acceptance: Vec<Value>,
}

impl Summary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub fn write_outputs(dir: &Path, table: Option<&Table>, summary: &Summary) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    if let Some(t) = table {
        let text = t.to_csv().map_err(|e| io::Error::other(e.to_string()))?;
        fs::write(dir.join("trajectory.csv"), text)?;
    }
    fs::write(dir.join("summary.json"), summary.to_json())
}
