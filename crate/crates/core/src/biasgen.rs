//! Synthetic tasks with a known label-bias mechanism.
//!
//! Observed labels are drawn from an exponentially tilted version of the true
//! label function:
//!
//! ```text
//! y_bias(y|x) ∝ y_true(y|x) · exp(-Σ_k λ_k c_k(x, y))
//! ```
//!
//! and the tilt is undone by multiplying with `exp(+Σ_k λ_k c_k(x, y))`.
//! Generated tasks use the membership-indicator constraint `c_k(x, 1) = g_k(x)`,
//! `c_k(x, 0) = 0`, which is the parameterization the reweighing weights use, so
//! weighting with the generating `λ*` inverts the bias exactly.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::classifier::sigmoid;
use crate::constraints::FairnessNotion;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::reweigher::EXPONENT_CLAMP;

/// Euclidean norm of the true linear scorer over the standard-normal features.
pub const SIGNAL_NORM: f64 = 4.0;
const MAX_GENERATION_RETRIES: u64 = 16;

fn tilt(lambda: &[f64], c: &[f64]) -> f64 {
    lambda
        .iter()
        .zip(c)
        .map(|(l, c)| l * c)
        .sum::<f64>()
        .clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP)
}

/// `y_bias(1|x)` for a true score `y_true(1|x)`, given `c1[k] = c_k(x, 1)`
/// and `c0[k] = c_k(x, 0)`.
pub fn bias_score(true_score: f64, lambda: &[f64], c1: &[f64], c0: &[f64]) -> f64 {
    let positive = true_score * (-tilt(lambda, c1)).exp();
    let negative = (1.0 - true_score) * (-tilt(lambda, c0)).exp();
    positive / (positive + negative)
}

/// Inverse of [`bias_score`]: `y_true(1|x)` from `y_bias(1|x)`.
pub fn debias_score(bias_score: f64, lambda: &[f64], c1: &[f64], c0: &[f64]) -> f64 {
    let positive = bias_score * tilt(lambda, c1).exp();
    let negative = (1.0 - bias_score) * tilt(lambda, c0).exp();
    positive / (positive + negative)
}

/// `c_k(x, 1)` of the generator: the membership indicators.
pub fn indicator_constraints(membership: &[u8]) -> Vec<f64> {
    membership.iter().map(|&g| f64::from(g)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSpec {
    pub lambda_star: Vec<f64>,
    #[serde(default = "default_notion")]
    pub notion: FairnessNotion,
    pub seed: u64,
}

fn default_notion() -> FairnessNotion {
    FairnessNotion::DemographicParity
}

impl BiasSpec {
    pub fn validate(&self) -> Result<()> {
        if self.notion != FairnessNotion::DemographicParity {
            return Err(Error::UnsupportedNotion {
                notion: self.notion.as_str(),
                operation: "bias generation",
            });
        }
        if self.lambda_star.is_empty() || self.lambda_star.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidConfig(
                "lambda_star must be a nonempty vector of finite values".into(),
            ));
        }
        Ok(())
    }
}

/// A generated dataset (observed labels drawn from the biased scores)
/// together with the quantities the bias hides.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub dataset: LabeledDataset,
    /// `y_true(1|x)` per example.
    pub true_scores: Vec<f64>,
    /// `y_bias(1|x)` per example, the distribution the observed labels follow.
    pub bias_scores: Vec<f64>,
    /// Labels drawn from `y_true`, for reference.
    pub true_labels: Vec<u8>,
}

impl SyntheticTask {
    /// The same examples labelled by `true_labels`.
    pub fn true_label_dataset(&self) -> Result<LabeledDataset> {
        self.dataset.with_labels(self.true_labels.clone())
    }

    /// Writes the CSV schema `load_csv` reads: features, one 0/1 column per
    /// group named after the group, then `label`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        let mut out = std::io::BufWriter::new(file);
        let ds = &self.dataset;
        let feature_cols: Vec<usize> = (0..ds.feature_count())
            .filter(|&j| !ds.group_names().contains(&ds.feature_names()[j]))
            .collect();
        let mut header: Vec<&str> = feature_cols.iter().map(|&j| ds.feature_names()[j].as_str()).collect();
        header.extend(ds.group_names().iter().map(String::as_str));
        header.push("label");
        writeln!(out, "{}", header.join(",")).map_err(io_err)?;
        for i in 0..ds.len() {
            let mut cells: Vec<String> = feature_cols
                .iter()
                .map(|&j| format!("{:?}", ds.features()[(i, j)]))
                .collect();
            cells.extend(ds.groups().row(i).iter().map(|g| g.to_string()));
            cells.push(ds.labels()[i].to_string());
            writeln!(out, "{}", cells.join(",")).map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

/// Shape of a generated task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n: usize,
    /// Number of standard-normal features, not counting the group indicators.
    pub d: usize,
    pub group_fraction: f64,
    #[serde(flatten)]
    pub bias: BiasSpec,
}

/// Draws a task: `d` standard-normal features plus one 0/1 indicator feature
/// per group, memberships `Bernoulli(group_fraction)` independent of the
/// features, `y_true(1|x) = σ(β₀·x)` for a seed-fixed `β₀` of norm
/// [`SIGNAL_NORM`] that ignores the indicators, and observed labels drawn from
/// the biased scores. A degenerate draw (a group with no members or no
/// non-members, or single-class labels) is redrawn with the next seed.
pub fn generate(cfg: &GeneratorConfig) -> Result<SyntheticTask> {
    cfg.bias.validate()?;
    if !(cfg.group_fraction > 0.0 && cfg.group_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "group_fraction must lie strictly between 0 and 1, got {}",
            cfg.group_fraction
        )));
    }
    if cfg.n < 2 || cfg.d == 0 {
        return Err(Error::InvalidConfig("synthetic task needs n >= 2 and d >= 1".into()));
    }
    let mut last_err = None;
    for retry in 0..MAX_GENERATION_RETRIES {
        match draw(cfg, cfg.bias.seed.wrapping_add(retry)) {
            Ok(task) => return Ok(task),
            Err(e @ (Error::DegenerateGroup { .. } | Error::SingleClassLabels)) => {
                log::debug!("redrawing synthetic task: {e}");
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn draw(cfg: &GeneratorConfig, seed: u64) -> Result<SyntheticTask> {
    let k = cfg.bias.lambda_star.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut beta: Vec<f64> = (0..cfg.d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    beta.iter_mut().for_each(|b| *b *= SIGNAL_NORM / norm);

    let mut features = Array2::<f64>::zeros((cfg.n, cfg.d + k));
    let mut groups = Array2::<u8>::zeros((cfg.n, k));
    let mut true_scores = Vec::with_capacity(cfg.n);
    let mut bias_scores = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    let mut true_labels = Vec::with_capacity(cfg.n);
    let c0 = vec![0.0; k];
    for i in 0..cfg.n {
        let mut margin = 0.0;
        for j in 0..cfg.d {
            let x: f64 = rng.sample(StandardNormal);
            features[(i, j)] = x;
            margin += beta[j] * x;
        }
        let membership: Vec<u8> = (0..k)
            .map(|_| u8::from(rng.random::<f64>() < cfg.group_fraction))
            .collect();
        for (g, &m) in membership.iter().enumerate() {
            groups[(i, g)] = m;
            features[(i, cfg.d + g)] = f64::from(m);
        }
        let t = sigmoid(margin);
        let b = bias_score(t, &cfg.bias.lambda_star, &indicator_constraints(&membership), &c0);
        // one uniform per label stream, drawn in a fixed order
        let u_observed: f64 = rng.random();
        let u_true: f64 = rng.random();
        true_scores.push(t);
        bias_scores.push(b);
        labels.push(u8::from(u_observed < b));
        true_labels.push(u8::from(u_true < t));
    }

    let group_names: Vec<String> = (0..k).map(|g| format!("group_{g}")).collect();
    let mut feature_names: Vec<String> = (0..cfg.d).map(|j| format!("x{j}")).collect();
    feature_names.extend(group_names.iter().cloned());
    let dataset = LabeledDataset::new(features, labels, groups, feature_names, group_names)?;
    if !true_labels.contains(&0) || !true_labels.contains(&1) {
        return Err(Error::SingleClassLabels);
    }
    Ok(SyntheticTask {
        dataset,
        true_scores,
        bias_scores,
        true_labels,
    })
}

/// Applies the inverse tilt with `lambda` to every biased score and returns
/// the largest absolute deviation from the true scores.
pub fn debias_check(task: &SyntheticTask, lambda: &[f64]) -> f64 {
    let c0 = vec![0.0; lambda.len()];
    (0..task.dataset.len())
        .map(|i| {
            let c1 = indicator_constraints(&task.dataset.membership(i));
            let recovered = debias_score(task.bias_scores[i], lambda, &c1, &c0);
            (recovered - task.true_scores[i]).abs()
        })
        .fold(0.0, f64::max)
}
