//! Experiment configuration files.

use std::path::{Path, PathBuf};

use debias_core::classifier::TrainConfig;
use debias_core::constraints::FairnessNotion;
use debias_core::data::GroupSpec;
use debias_core::reweigher::ReweighConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Unconstrained,
    Calibration,
    Reweigh,
    ReweighSampling,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Unconstrained => "unconstrained",
            Method::Calibration => "calibration",
            Method::Reweigh => "reweigh",
            Method::ReweighSampling => "reweigh_sampling",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub label_column: String,
    #[serde(default)]
    pub drop_columns: Vec<String>,
    pub group_specs: Vec<GroupSpec>,
}

/// Parameters of a generated task; its seed comes from the experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub n: usize,
    pub d: usize,
    pub group_fraction: f64,
    pub lambda_star: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Csv(CsvSource),
    Synthetic(SyntheticSource),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset label used in the summary CSV.
    pub name: String,
    pub dataset: DatasetSource,
    pub notion: FairnessNotion,
    /// Feature columns hidden from the classifier (disparate impact only).
    #[serde(default)]
    pub masked_columns: Vec<String>,
    pub methods: Vec<Method>,
    pub split: SplitSection,
    /// Governs the split, synthetic generation and sampling draws.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reweigh: ReweighConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// JSON report path; the CSV summary goes next to it with a `.csv`
    /// extension. Relative paths resolve against the config file's directory.
    pub output_path: PathBuf,
}

/// Sub-seed offsets, one namespace per consumer of randomness.
pub const SPLIT_SEED_OFFSET: u64 = 0;
pub const SYNTHETIC_SEED_OFFSET: u64 = 1 << 32;
pub const SAMPLING_SEED_OFFSET: u64 = 2 << 32;

impl ExperimentConfig {
    pub fn split_seed(&self) -> u64 {
        self.seed.wrapping_add(SPLIT_SEED_OFFSET)
    }

    pub fn synthetic_seed(&self) -> u64 {
        self.seed.wrapping_add(SYNTHETIC_SEED_OFFSET)
    }

    pub fn sampling_seed(&self) -> u64 {
        self.seed.wrapping_add(SAMPLING_SEED_OFFSET)
    }

    /// Parses JSON, reporting the path of the offending field on failure.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig =
            serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let DatasetSource::Csv(csv) = &mut self.dataset {
            if csv.path.is_relative() {
                csv.path = base.join(&csv.path);
            }
        }
        if self.output_path.is_relative() {
            self.output_path = base.join(&self.output_path);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |path: &str, message: String| CliError::Config {
            path: path.to_string(),
            message,
        };
        if self.methods.is_empty() {
            return Err(invalid("methods", "at least one method is required".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(invalid("methods", "methods must not repeat".into()));
        }
        if self.methods.contains(&Method::Calibration)
            && matches!(
                self.notion,
                FairnessNotion::DisparateImpact | FairnessNotion::EqualizedOdds
            )
        {
            return Err(invalid(
                "methods",
                format!("calibration does not apply to {}", self.notion),
            ));
        }
        if self.notion == FairnessNotion::DisparateImpact && self.masked_columns.is_empty() {
            return Err(invalid(
                "masked_columns",
                "disparate impact requires the protected feature columns to mask".into(),
            ));
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(invalid(
                "split.test_fraction",
                format!("must lie strictly between 0 and 1, got {}", self.split.test_fraction),
            ));
        }
        if let DatasetSource::Synthetic(s) = &self.dataset {
            if !(s.group_fraction > 0.0 && s.group_fraction < 1.0) {
                return Err(invalid(
                    "dataset.synthetic.group_fraction",
                    format!("must lie strictly between 0 and 1, got {}", s.group_fraction),
                ));
            }
            if s.lambda_star.is_empty() {
                return Err(invalid("dataset.synthetic.lambda_star", "must not be empty".into()));
            }
        }
        self.reweigh
            .validate()
            .map_err(|e| invalid("reweigh", e.to_string()))?;
        self.train.validate().map_err(|e| invalid("train", e.to_string()))?;
        Ok(())
    }

    pub fn summary_path(&self) -> PathBuf {
        self.output_path.with_extension("csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "toy",
        "dataset": {"synthetic": {"n": 100, "d": 2, "group_fraction": 0.5, "lambda_star": [1.0]}},
        "notion": "demographic_parity",
        "methods": ["unconstrained"],
        "split": {"test_fraction": 0.25},
        "output_path": "out/report.json"
    }"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.reweigh, ReweighConfig::default());
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.summary_path(), PathBuf::from("out/report.csv"));
    }

    #[test]
    fn field_path_in_errors() {
        let bad = MINIMAL.replace("\"test_fraction\": 0.25", "\"test_fraction\": \"x\"");
        match ExperimentConfig::from_json(&bad) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "split.test_fraction"),
            other => panic!("{other:?}"),
        }
        let bad = MINIMAL.replace("\"methods\": [\"unconstrained\"]", "\"methods\": [\"lagrangian\"]");
        match ExperimentConfig::from_json(&bad) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "methods[0]"),
            other => panic!("{other:?}"),
        }
        let bad = MINIMAL.replace("\"seed\"", "\"sed\"").replace("\"name\"", "\"sed\": 1, \"name\"");
        match ExperimentConfig::from_json(&bad) {
            Err(CliError::Config { message, .. }) => assert!(message.contains("sed")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn calibration_rejected_for_equalized_odds() {
        let bad = MINIMAL
            .replace("demographic_parity", "equalized_odds")
            .replace("[\"unconstrained\"]", "[\"unconstrained\", \"calibration\"]");
        match ExperimentConfig::from_json(&bad) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "methods"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn disparate_impact_needs_masked_columns() {
        let bad = MINIMAL.replace("demographic_parity", "disparate_impact");
        match ExperimentConfig::from_json(&bad) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "masked_columns"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sub_seeds_are_distinct() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let seeds = [cfg.split_seed(), cfg.synthetic_seed(), cfg.sampling_seed()];
        assert_eq!(seeds.iter().collect::<std::collections::BTreeSet<_>>().len(), 3);
    }
}
