//! Report documents and their files.

use std::fs;
use std::path::Path;

use ch_entropy::zoo::{GroundTruth, Provenance, CATALOG_VERSION};
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::CliError;

/// One pass/fail comparison. A `target` taken from the catalog always
/// carries its provenance tag.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub provenance: Option<Provenance>,
    pub note: Option<String>,
}

impl Check {
    /// `value` against a catalog entry.
    pub fn against(name: &str, value: f64, truth: &GroundTruth) -> Self {
        Check {
            name: name.into(),
            value,
            target: Some(truth.value),
            tolerance: truth.tolerance,
            passed: truth.accepts(value),
            provenance: Some(truth.provenance),
            note: Some(truth.note.clone()),
        }
    }

    /// `value <= tolerance`, for residuals.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target: None,
            tolerance,
            passed: value <= tolerance,
            provenance: None,
            note: None,
        }
    }

    /// `value >= -tolerance`.
    pub fn nonnegative(name: &str, value: f64, tolerance: f64) -> Self {
        Check { passed: value >= -tolerance, ..Check::at_most(name, value, tolerance) }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub catalog_version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub command: &'static str,
    pub inputs: Value,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub result: Value,
}

impl Report {
    pub fn new(config: &RunConfig, checks: Vec<Check>, result: Value) -> Self {
        Report {
            tool: "ch-entropy",
            version: env!("CARGO_PKG_VERSION"),
            catalog_version: CATALOG_VERSION,
            config_hash: config.hash(),
            seed: config.seed,
            command: config.command.as_str(),
            inputs: serde_json::to_value(config).expect("config serializes"),
            passed: checks.iter().all(|c| c.passed),
            checks,
            result,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// A numeric table written as CSV.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: impl IntoIterator<Item = String>) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }
}

/// Shortest round-trip formatting, so tables are reproducible.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        String::new()
    }
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// Everything a run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub profile: Option<Table>,
    pub trace: Option<Table>,
}

impl Outcome {
    /// Writes `report.json` and whichever of `profile.csv` and `trace.csv`
    /// the command produced.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join("report.json"), self.report.to_json()).map_err(io)?;
        if let Some(t) = &self.profile {
            fs::write(dir.join("profile.csv"), t.to_csv()?).map_err(io)?;
        }
        if let Some(t) = &self.trace {
            fs::write(dir.join("trace.csv"), t.to_csv()?).map_err(io)?;
        }
        Ok(())
    }
}
