use std::path::Path;

use quasimean::report::Check;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::error::CliError;

/// Body of every JSON report. Keys of `results` are sorted, so two runs with
/// the same inputs serialize byte for byte the same.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    pub dimension: usize,
    pub seed: u64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
    pub results: Map<String, Value>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Report {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Report {
            command: command.to_string(),
            suite: None,
            dimension: cfg.dimension,
            seed: cfg.seed,
            samples: cfg.samples,
            map: None,
            potential: None,
            results: Map::new(),
            checks: Vec::new(),
            passed: true,
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("report values serialize");
        self.results.insert(key.to_string(), value);
    }

    pub fn failed(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        let mut body = serde_json::to_string_pretty(self).expect("report serializes");
        body.push('\n');
        body
    }

    /// Writes the report to `out` (stdout when `None`), then turns failed
    /// checks into an error naming them.
    pub fn finish(mut self, out: Option<&Path>) -> Result<(), CliError> {
        let failed = self.failed();
        self.passed = failed.is_empty();
        let body = self.to_json();
        match out {
            Some(path) => std::fs::write(path, body).map_err(|source| CliError::Output {
                path: path.to_path_buf(),
                source,
            })?,
            None => print!("{body}"),
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Verification(failed))
        }
    }
}

/// Headerless CSV, one row per record.
pub fn write_csv(path: &Path, rows: &[Vec<f64>]) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Output {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(err)?;
    for row in rows {
        w.write_record(row.iter().map(f64::to_string)).map_err(err)?;
    }
    w.flush().map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}
