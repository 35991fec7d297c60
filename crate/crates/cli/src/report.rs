//! Machine-readable run reports.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use spectra_index::{Error, Result};

/// Rows for `--csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(header: &[&str], rows: Vec<Vec<Value>>) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows,
        }
    }

    fn write(&self, path: &Path) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| match v {
                Value::String(s) => s.clone(),
                Value::Null => String::new(),
                other => other.to_string(),
            }))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// What a command produced, before it is folded into the report.
#[derive(Debug)]
pub struct Outcome {
    pub results: Value,
    pub table: Option<Table>,
    /// A certificate came back refuted.
    pub refuted: bool,
    /// The command ran but its own check failed.
    pub failed: Option<Error>,
}

impl Outcome {
    pub fn ok(results: Value) -> Self {
        Self {
            results,
            table: None,
            refuted: false,
            failed: None,
        }
    }

    pub fn with_table(mut self, t: Table) -> Self {
        self.table = Some(t);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub name: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 of the config file, or of the argument list for commands
    /// without one.
    pub input_digest: Option<String>,
    pub results: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Value>,
    pub version: String,
    pub tolerances: Value,
    pub exit_code: u8,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            input_digest: None,
            results: Value::Null,
            error: None,
            timing: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            tolerances: json!({}),
            exit_code: 0,
        }
    }

    pub fn digest_text(&mut self, text: &str) {
        let d = Sha256::digest(text.as_bytes());
        self.input_digest = Some(d.iter().map(|b| format!("{b:02x}")).collect());
    }

    fn record(&mut self, e: &Error) -> u8 {
        self.error = Some(ErrorRecord {
            name: e.name().to_string(),
            message: e.to_string(),
        });
        if e.is_input_error() {
            2
        } else {
            3
        }
    }

    /// Folds the outcome in, writes the CSV table if asked, and returns the
    /// exit status: 0 success, 1 refuted, 2 config error, 3 numerical failure.
    pub fn finish(&mut self, outcome: Result<Outcome>, csv: Option<&Path>) -> u8 {
        let code = match outcome {
            Err(e) => self.record(&e),
            Ok(o) => {
                self.results = o.results;
                let csv_error = match (csv, &o.table) {
                    (None, _) => None,
                    (Some(_), None) => Some(Error::Config(format!("--csv: {} has no table", self.command))),
                    (Some(path), Some(t)) => t
                        .write(path)
                        .err()
                        .map(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
                };
                if let Some(e) = csv_error {
                    self.record(&e)
                } else if let Some(e) = &o.failed {
                    self.record(e)
                } else if o.refuted {
                    1
                } else {
                    0
                }
            }
        };
        self.exit_code = code;
        code
    }
}

pub fn write(report: &RunReport, out: Option<&Path>) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}
