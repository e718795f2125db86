//! Weighted, L2-regularized binary logistic regression.
//!
//! The training objective is
//!
//! ```text
//! (1 / Σw) Σ_i w_i · logloss(σ(β·x_i + b), y_i) + l2_strength · ‖β‖²
//! ```
//!
//! It is normalized by the total weight, so scaling every weight by the same
//! factor leaves the minimizer unchanged. The intercept is not penalized.
//! Both solvers start from zero and are deterministic.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

/// Probabilities are kept this far from 0 and 1.
pub const PROBABILITY_FLOOR: f64 = f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl ModelParams {
    pub fn zeros(d: usize) -> Self {
        Self {
            coefficients: vec![0.0; d],
            intercept: 0.0,
        }
    }

    fn from_flat(theta: &[f64]) -> Self {
        let (coefficients, intercept) = theta.split_at(theta.len() - 1);
        Self {
            coefficients: coefficients.to_vec(),
            intercept: intercept[0],
        }
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut theta = self.coefficients.clone();
        theta.push(self.intercept);
        theta
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.coefficients.iter().all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Damped Newton steps with Armijo backtracking.
    Newton,
    /// Fixed-step full-batch gradient descent using `step_size`.
    GradientDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub l2_strength: f64,
    pub max_iterations: usize,
    pub step_size: f64,
    pub gradient_tolerance: f64,
    pub solver: Solver,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_strength: 1e-4,
            max_iterations: 5000,
            step_size: 0.5,
            gradient_tolerance: 1e-7,
            solver: Solver::Newton,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.l2_strength >= 0.0
            && self.l2_strength.is_finite()
            && self.max_iterations > 0
            && self.step_size > 0.0
            && self.step_size.is_finite()
            && self.gradient_tolerance > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid train config {self:?}")))
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Row-compressed copy of the design matrix with the implicit intercept
/// column at index `d`. One-hot encoded data is mostly zeros.
struct Design {
    d: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Design {
    fn new(features: &Array2<f64>, keep: &[usize]) -> Self {
        let d = features.ncols();
        let mut row_start = Vec::with_capacity(keep.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for &i in keep {
            for (j, &v) in features.row(i).iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            cols.push(d);
            vals.push(1.0);
            row_start.push(cols.len());
        }
        Self {
            d,
            row_start,
            cols,
            vals,
        }
    }

    fn rows(&self) -> usize {
        self.row_start.len() - 1
    }

    fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_start[r]..self.row_start[r + 1];
        (&self.cols[range.clone()], &self.vals[range])
    }

    fn margin(&self, r: usize, theta: &[f64]) -> f64 {
        let (cols, vals) = self.row(r);
        cols.iter().zip(vals).map(|(&j, &v)| theta[j] * v).sum()
    }
}

/// The training objective restricted to positively weighted rows, with
/// weights already divided by their sum.
struct Objective {
    design: Design,
    labels: Vec<f64>,
    weights: Vec<f64>,
    l2: f64,
}

impl Objective {
    fn new(ds: &LabeledDataset, weights: &[f64], l2: f64) -> Result<Self> {
        if weights.len() != ds.len() {
            return Err(Error::DimensionMismatch {
                expected: ds.len(),
                actual: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidWeights(format!("weight {i} is not finite")));
        }
        if let Some(i) = weights.iter().position(|&w| w < 0.0) {
            return Err(Error::InvalidWeights(format!("weight {i} is negative")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidWeights("all weights are zero".into()));
        }
        let keep: Vec<usize> = (0..ds.len()).filter(|&i| weights[i] > 0.0).collect();
        Ok(Self {
            design: Design::new(ds.features(), &keep),
            labels: keep.iter().map(|&i| f64::from(ds.labels()[i])).collect(),
            weights: keep.iter().map(|&i| weights[i] / total).collect(),
            l2,
        })
    }

    fn dim(&self) -> usize {
        self.design.d + 1
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        self.l2 * theta[..self.design.d].iter().map(|b| b * b).sum::<f64>()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let loss: f64 = (0..self.design.rows())
            .map(|r| {
                let z = self.design.margin(r, theta);
                self.weights[r] * (softplus(z) - self.labels[r] * z)
            })
            .sum();
        loss + self.penalty(theta)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.dim()];
        for r in 0..self.design.rows() {
            let z = self.design.margin(r, theta);
            let residual = self.weights[r] * (sigmoid(z) - self.labels[r]);
            let (cols, vals) = self.design.row(r);
            for (&j, &v) in cols.iter().zip(vals) {
                grad[j] += residual * v;
            }
        }
        for j in 0..self.design.d {
            grad[j] += 2.0 * self.l2 * theta[j];
        }
        grad
    }

    /// Upper triangle accumulated, then mirrored.
    fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let p = self.dim();
        let mut h = DMatrix::<f64>::zeros(p, p);
        for r in 0..self.design.rows() {
            let s = sigmoid(self.design.margin(r, theta));
            let curvature = self.weights[r] * s * (1.0 - s);
            if curvature == 0.0 {
                continue;
            }
            let (cols, vals) = self.design.row(r);
            for a in 0..cols.len() {
                let va = curvature * vals[a];
                for b in a..cols.len() {
                    h[(cols[a], cols[b])] += va * vals[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        for j in 0..self.design.d {
            h[(j, j)] += 2.0 * self.l2;
        }
        h
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fits the weighted objective. Rows with zero weight are ignored.
pub fn train_weighted(ds: &LabeledDataset, weights: &[f64], cfg: &TrainConfig) -> Result<ModelParams> {
    train_weighted_with_history(ds, weights, cfg).map(|(m, _)| m)
}

/// [`train_weighted`] that also returns the objective value after every
/// iterate, starting with the zero initialization.
pub fn train_weighted_with_history(
    ds: &LabeledDataset,
    weights: &[f64],
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<f64>)> {
    cfg.validate()?;
    let obj = Objective::new(ds, weights, cfg.l2_strength)?;
    let mut theta = vec![0.0; obj.dim()];
    let mut value = obj.value(&theta);
    let mut history = vec![value];

    for iteration in 0..cfg.max_iterations {
        let grad = obj.gradient(&theta);
        if inf_norm(&grad) <= cfg.gradient_tolerance {
            break;
        }
        let next = match cfg.solver {
            Solver::GradientDescent => {
                let candidate: Vec<f64> = theta
                    .iter()
                    .zip(&grad)
                    .map(|(t, g)| t - cfg.step_size * g)
                    .collect();
                let v = obj.value(&candidate);
                Some((candidate, v))
            }
            Solver::Newton => newton_step(&obj, &theta, &grad, value),
        };
        let Some((candidate, v)) = next else {
            // no descent direction left at working precision
            break;
        };
        if !v.is_finite() {
            return Err(Error::Diverged {
                iteration: iteration + 1,
            });
        }
        theta = candidate;
        value = v;
        history.push(value);
    }

    let model = ModelParams::from_flat(&theta);
    if !model.is_finite() {
        return Err(Error::Diverged {
            iteration: history.len(),
        });
    }
    Ok((model, history))
}

fn newton_step(obj: &Objective, theta: &[f64], grad: &[f64], value: f64) -> Option<(Vec<f64>, f64)> {
    let hessian = obj.hessian(theta);
    let rhs = DVector::from_iterator(grad.len(), grad.iter().map(|g| -g));
    let scale = hessian.diagonal().max().max(1e-12);
    let mut direction = None;
    for attempt in 0..12 {
        let jitter = if attempt == 0 { 0.0 } else { scale * 1e-12 * 10f64.powi(attempt) };
        let mut h = hessian.clone();
        for j in 0..h.nrows() {
            h[(j, j)] += jitter;
        }
        if let Some(chol) = h.cholesky() {
            direction = Some(chol.solve(&rhs));
            break;
        }
    }
    let direction: Vec<f64> = match direction {
        Some(d) => d.iter().copied().collect(),
        None => rhs.iter().copied().collect(),
    };
    let slope: f64 = direction.iter().zip(grad).map(|(d, g)| d * g).sum();
    if slope >= 0.0 {
        return None;
    }
    let mut step = 1.0;
    for _ in 0..60 {
        let candidate: Vec<f64> = theta
            .iter()
            .zip(&direction)
            .map(|(t, d)| t + step * d)
            .collect();
        let v = obj.value(&candidate);
        if v.is_finite() && v <= value + 1e-4 * step * slope {
            return Some((candidate, v));
        }
        step *= 0.5;
    }
    None
}

/// Value of the training objective at `m`.
pub fn objective(m: &ModelParams, ds: &LabeledDataset, weights: &[f64], cfg: &TrainConfig) -> Result<f64> {
    check_dim(m, ds.feature_count())?;
    Ok(Objective::new(ds, weights, cfg.l2_strength)?.value(&m.to_flat()))
}

/// Analytic gradient of the training objective at `m`, coefficients first
/// and the intercept last.
pub fn weighted_gradient(
    m: &ModelParams,
    ds: &LabeledDataset,
    weights: &[f64],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    check_dim(m, ds.feature_count())?;
    Ok(Objective::new(ds, weights, cfg.l2_strength)?.gradient(&m.to_flat()))
}

fn check_dim(m: &ModelParams, d: usize) -> Result<()> {
    if m.coefficients.len() != d {
        return Err(Error::DimensionMismatch {
            expected: m.coefficients.len(),
            actual: d,
        });
    }
    Ok(())
}

/// `σ(β·x + b)` per row, clamped to `[PROBABILITY_FLOOR, 1 - PROBABILITY_FLOOR]`.
pub fn predict_proba(m: &ModelParams, features: &Array2<f64>) -> Result<Vec<f64>> {
    check_dim(m, features.ncols())?;
    Ok(features
        .rows()
        .into_iter()
        .map(|row| {
            let z = row
                .iter()
                .zip(&m.coefficients)
                .map(|(x, b)| x * b)
                .sum::<f64>()
                + m.intercept;
            sigmoid(z).clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
        })
        .collect())
}

/// 1 iff the probability is at least 0.5.
pub fn predict_label(m: &ModelParams, features: &Array2<f64>) -> Result<Vec<u8>> {
    Ok(predict_proba(m, features)?
        .into_iter()
        .map(label_from_proba)
        .collect())
}

pub fn label_from_proba(p: f64) -> u8 {
    u8::from(p >= 0.5)
}

/// Fraction of predictions that differ from the labels.
pub fn error_rate(predictions: &[u8], labels: &[u8]) -> f64 {
    assert_eq!(predictions.len(), labels.len(), "prediction/label length mismatch");
    let wrong = predictions.iter().zip(labels).filter(|(p, y)| p != y).count();
    wrong as f64 / labels.len().max(1) as f64
}
