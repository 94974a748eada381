//! Report envelope shared by every command, rendered as CSV or JSON.
//!
//! CSV output starts with `#` metadata lines (tool, version, command, seed,
//! config echo, status, failures) followed by a header row and data rows.

use std::fs;
use std::io::Write;
use std::path::Path;

use cyclefix::report::write_csv;
use cyclefix::{Error, Result, VERSION};
use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, RunConfig};

pub const TOOL: &str = "cyclefix";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: Value,
    pub status: Status,
    /// Verification failures: prediction mismatches and bound violations.
    pub failures: Vec<String>,
    /// Set when the command stopped on an error.
    pub error: Option<String>,
    pub scenario: Value,
    pub results: Value,
    #[serde(skip)]
    pub table: Table,
}

impl Report {
    pub fn new(config: &RunConfig, seed: u64) -> Self {
        Report {
            tool: TOOL,
            version: VERSION,
            command: config.params.name(),
            seed,
            config: serde_json::to_value(config).expect("config serializes"),
            status: Status::Ok,
            failures: Vec::new(),
            error: None,
            scenario: Value::Null,
            results: Value::Null,
            table: Table::default(),
        }
    }

    pub fn fail(&mut self, msg: impl Into<String>) {
        self.failures.push(msg.into());
        self.status = Status::Failed;
    }

    pub fn abort(&mut self, err: &Error) {
        self.error = Some(err.to_string());
        self.status = Status::Failed;
        if self.table.header.is_empty() {
            self.table = Table::new(["error"]);
            self.table.push(vec![err.to_string()]);
        }
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self)
                    .map_err(|e| Error::invalid(format!("json encoding failed: {e}")))?;
                s.push('\n');
                Ok(s.into_bytes())
            }
            Format::Csv => {
                let mut out = Vec::new();
                self.write_metadata(&mut out)?;
                let header: Vec<&str> = self.table.header.iter().map(String::as_str).collect();
                write_csv(&mut out, &header, &self.table.rows)?;
                Ok(out)
            }
        }
    }

    pub fn write_metadata(&self, out: &mut Vec<u8>) -> Result<()> {
        let io = |e: std::io::Error| Error::invalid(format!("write failed: {e}"));
        let status = if self.status == Status::Ok { "ok" } else { "failed" };
        writeln!(out, "# tool={}", self.tool).map_err(io)?;
        writeln!(out, "# version={}", self.version).map_err(io)?;
        writeln!(out, "# command={}", self.command).map_err(io)?;
        writeln!(out, "# seed={}", self.seed).map_err(io)?;
        writeln!(out, "# config={}", self.config).map_err(io)?;
        writeln!(out, "# status={status}").map_err(io)?;
        for f in &self.failures {
            writeln!(out, "# failure={}", one_line(f)).map_err(io)?;
        }
        if let Some(e) = &self.error {
            writeln!(out, "# error={}", one_line(e)).map_err(io)?;
        }
        Ok(())
    }
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

/// Writes `bytes` to `path`, or to standard output without a path.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Error::invalid(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::invalid(format!("cannot write to standard output: {e}"))),
    }
}
