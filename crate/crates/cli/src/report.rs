//! Output files. Every file embeds the config that produced it.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ExperimentConfig, Format, SCHEMA_VERSION};
use crate::error::CliError;

const CSV_CONFIG_PREFIX: &str = "# config: ";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name).map(|v| v.into_iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub table: Table,
    pub summary: Value,
    pub checks: Vec<Check>,
    /// False when the run was interrupted and the table is partial.
    pub complete: bool,
}

impl Report {
    pub fn new(config: &ExperimentConfig, table: Table, summary: Value, checks: Vec<Check>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            experiment: config.spec.id().to_string(),
            config: config.clone(),
            table,
            summary,
            checks,
            complete: true,
        }
    }

    pub fn passed(&self) -> bool {
        self.complete && self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV with the config and summary as leading comment lines.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut out = Vec::new();
        writeln!(out, "{CSV_CONFIG_PREFIX}{}", serde_json::to_string(&self.config).unwrap())?;
        writeln!(out, "# schemaVersion: {}", self.schema_version)?;
        writeln!(out, "# complete: {}", self.complete)?;
        writeln!(out, "# summary: {}", serde_json::to_string(&self.summary).unwrap())?;
        for c in &self.checks {
            writeln!(out, "# check: {} {} {}", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail)?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.table.columns).map_err(|e| CliError::Output(e.to_string()))?;
            for row in &self.table.rows {
                let cells: Vec<String> = row.iter().map(cell_text).collect();
                w.write_record(&cells).map_err(|e| CliError::Output(e.to_string()))?;
            }
            w.flush()?;
        }
        String::from_utf8(out).map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => Ok(self.to_json()),
            Format::Csv => self.to_csv(),
        }
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<(), CliError> {
        std::fs::write(path, self.render(format)?)?;
        Ok(())
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Recover the embedded config from a JSON report or a CSV table.
pub fn embedded_config(text: &str) -> Result<ExperimentConfig, CliError> {
    if let Some(line) = text.lines().find(|l| l.starts_with(CSV_CONFIG_PREFIX)) {
        return ExperimentConfig::from_json(&line[CSV_CONFIG_PREFIX.len()..]);
    }
    let v: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("not a report: {e}")))?;
    let cfg = v.get("config").ok_or_else(|| CliError::Config("report has no embedded config".into()))?;
    ExperimentConfig::from_json(&cfg.to_string())
}
