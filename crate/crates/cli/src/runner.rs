//! Executes one experiment config end to end.

use std::path::Path;

use debias_core::baselines::{calibrate, train_unconstrained};
use debias_core::biasgen::{generate, BiasSpec, GeneratorConfig};
use debias_core::classifier::{error_rate, predict_label, ModelParams};
use debias_core::constraints::{max_abs, ConstraintSet, FairnessNotion};
use debias_core::data::{load_csv, mask_group_features, train_test_split, LabeledDataset, SplitConfig};
use debias_core::reweigher::{fit_with, Technique};

use crate::config::{DatasetSource, ExperimentConfig, Method};
use crate::error::CliError;
use crate::report::{ExperimentReport, MethodReport};

struct Splits {
    train: LabeledDataset,
    test: LabeledDataset,
    /// Test split relabelled with the unobserved true labels (synthetic only).
    test_true: Option<LabeledDataset>,
}

fn load_splits(cfg: &ExperimentConfig) -> Result<Splits, CliError> {
    let split = SplitConfig {
        test_fraction: cfg.split.test_fraction,
        seed: cfg.split_seed(),
    };
    let (full, full_true) = match &cfg.dataset {
        DatasetSource::Csv(src) => (
            load_csv(&src.path, &src.label_column, &src.group_specs, &src.drop_columns)?,
            None,
        ),
        DatasetSource::Synthetic(src) => {
            let task = generate(&GeneratorConfig {
                n: src.n,
                d: src.d,
                group_fraction: src.group_fraction,
                bias: BiasSpec {
                    lambda_star: src.lambda_star.clone(),
                    notion: FairnessNotion::DemographicParity,
                    seed: cfg.synthetic_seed(),
                },
            })?;
            let true_ds = task.true_label_dataset()?;
            (task.dataset, Some(true_ds))
        }
    };
    let (mut train, mut test) = train_test_split(&full, &split)?;
    let mut test_true = match full_true {
        Some(ds) => Some(train_test_split(&ds, &split)?.1),
        None => None,
    };
    if cfg.notion == FairnessNotion::DisparateImpact {
        train = mask_group_features(&train, &cfg.masked_columns)?;
        test = mask_group_features(&test, &cfg.masked_columns)?;
        test_true = test_true
            .map(|ds| mask_group_features(&ds, &cfg.masked_columns))
            .transpose()?;
    }
    Ok(Splits { train, test, test_true })
}

fn evaluate(
    method: Method,
    predictions: &[u8],
    splits: &Splits,
    test_cs: &ConstraintSet,
) -> Result<MethodReport, CliError> {
    let wrap = |source| CliError::Method {
        method: method.as_str(),
        source,
    };
    let hard: Vec<f64> = predictions.iter().map(|&p| f64::from(p)).collect();
    let violation_vector = test_cs.violation(&splits.test, &hard).map_err(wrap)?;
    Ok(MethodReport {
        method: method.as_str().to_string(),
        test_error: error_rate(predictions, splits.test.labels()),
        test_violation_max: max_abs(&violation_vector),
        violation_vector,
        test_error_true_labels: splits
            .test_true
            .as_ref()
            .map(|t| error_rate(predictions, t.labels())),
        model: None,
        multipliers: None,
        trace: None,
        thresholds: None,
    })
}

/// Runs every configured method on a shared split and assembles the report.
/// Nothing is written to disk.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    let splits = load_splits(cfg)?;
    let train_cs = ConstraintSet::from_dataset(cfg.notion, &splits.train)?;
    let test_cs = ConstraintSet::from_dataset(cfg.notion, &splits.test)?;
    log::info!(
        "{}: {} train / {} test rows, {} features, {} groups",
        cfg.name,
        splits.train.len(),
        splits.test.len(),
        splits.train.feature_count(),
        splits.train.group_count()
    );

    let mut unconstrained: Option<ModelParams> = None;
    let mut methods = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let wrap = |source| CliError::Method {
            method: method.as_str(),
            source,
        };
        log::info!("running {}", method.as_str());
        let report = match method {
            Method::Unconstrained | Method::Calibration => {
                let base = match &unconstrained {
                    Some(m) => m.clone(),
                    None => {
                        let m = train_unconstrained(&splits.train, &cfg.train).map_err(wrap)?;
                        unconstrained = Some(m.clone());
                        m
                    }
                };
                if method == Method::Unconstrained {
                    let preds = predict_label(&base, splits.test.features()).map_err(wrap)?;
                    MethodReport {
                        model: Some(base),
                        ..evaluate(method, &preds, &splits, &test_cs)?
                    }
                } else {
                    let cal = calibrate(&base, &splits.train, &train_cs).map_err(wrap)?;
                    let preds = cal.predict_label(&splits.test).map_err(wrap)?;
                    MethodReport {
                        model: Some(cal.base),
                        thresholds: Some(cal.thresholds),
                        ..evaluate(method, &preds, &splits, &test_cs)?
                    }
                }
            }
            Method::Reweigh | Method::ReweighSampling => {
                let technique = if method == Method::Reweigh {
                    Technique::Weighting
                } else {
                    Technique::Sampling {
                        seed: cfg.sampling_seed(),
                    }
                };
                let fitted = fit_with(&splits.train, &train_cs, &cfg.reweigh, &cfg.train, technique)
                    .map_err(wrap)?;
                let preds = predict_label(&fitted.model, splits.test.features()).map_err(wrap)?;
                MethodReport {
                    model: Some(fitted.model),
                    multipliers: Some(fitted.multipliers),
                    trace: Some(fitted.trace),
                    ..evaluate(method, &preds, &splits, &test_cs)?
                }
            }
        };
        methods.push(report);
    }

    Ok(ExperimentReport {
        name: cfg.name.clone(),
        notion: cfg.notion.as_str().to_string(),
        seed: cfg.seed,
        timestamp: chrono::Utc::now().to_rfc3339(),
        train_size: splits.train.len(),
        test_size: splits.test.len(),
        group_names: splits.train.group_names().to_vec(),
        config: cfg.clone(),
        methods,
    })
}

/// Loads a config, applies the seed override, runs it and writes the JSON
/// report and CSV summary.
pub fn run(config_path: &Path, seed_override: Option<u64>) -> Result<ExperimentReport, CliError> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let report = execute(&cfg)?;
    report.write(&cfg.output_path, &cfg.summary_path())?;
    Ok(report)
}
