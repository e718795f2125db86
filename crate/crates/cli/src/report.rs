//! Experiment reports: JSON document, CSV summary and schema check.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use debias_core::classifier::ModelParams;
use debias_core::reweigher::Multipliers;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// JSON schema every report is checked against before it is written.
pub const REPORT_SCHEMA: &str = include_str!("../../../docs/report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    /// Misclassification rate of hard predictions on the test split.
    pub test_error: f64,
    /// `max_k |Δ_k|` of hard predictions, test-split base rates.
    pub test_violation_max: f64,
    pub violation_vector: Vec<f64>,
    /// Synthetic runs only: error against the unobserved true labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_error_true_labels: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Multipliers>,
    /// Training-split violation (probabilistic scores) per loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub notion: String,
    pub seed: u64,
    /// RFC 3339, the only field that differs between repeated runs.
    pub timestamp: String,
    pub train_size: usize,
    pub test_size: usize,
    pub group_names: Vec<String>,
    pub config: ExperimentConfig,
    pub methods: Vec<MethodReport>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String, CliError> {
        let value = serde_json::to_value(self).map_err(|e| CliError::Schema(e.to_string()))?;
        validate_against_schema(&value)?;
        let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Schema(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("dataset,notion,method,test_error,test_violation_max\n");
        for m in &self.methods {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                csv_cell(&self.name),
                self.notion,
                m.method,
                m.test_error,
                m.test_violation_max
            ));
        }
        out
    }

    /// Writes the JSON report to `json_path` and the summary to `csv_path`.
    pub fn write(&self, json_path: &Path, csv_path: &Path) -> Result<(), CliError> {
        let json = self.to_json()?;
        write_file(json_path, json.as_bytes())?;
        write_file(csv_path, self.summary_csv().as_bytes())
    }

    /// Human-readable table for standard output.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{} ({}), train {} / test {}\n{:<18} {:>10} {:>10}\n",
            self.name, self.notion, self.train_size, self.test_size, "method", "error", "violation"
        );
        for m in &self.methods {
            out.push_str(&format!(
                "{:<18} {:>10.4} {:>10.4}\n",
                m.method, m.test_error, m.test_violation_max
            ));
        }
        out
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)
}

pub fn validate_against_schema(value: &serde_json::Value) -> Result<(), CliError> {
    let schema: serde_json::Value =
        serde_json::from_str(REPORT_SCHEMA).map_err(|e| CliError::Schema(e.to_string()))?;
    let validator = jsonschema::validator_for(&schema).map_err(|e| CliError::Schema(e.to_string()))?;
    let errors: Vec<String> = validator
        .iter_errors(value)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Schema(errors.join("; ")))
    }
}
