//! Closed-form example weights from per-group multipliers, and the loop that
//! learns the multipliers by alternating retraining with violation updates.
//!
//! For multipliers `λ` and an example in groups `g`, let
//! `w̃ = exp(Σ_k λ_k g_k)`. Positive examples get weight `w̃ / (1 + w̃)` and
//! negative examples `1 / (1 + w̃)`. Equalized odds keeps separate
//! true-positive and false-positive multipliers; negatives then use
//! `w̃_F / (1 + w̃_F)` with `w̃_F = exp(-Σ_k λ^FP_k g_k)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{predict_proba, train_weighted, ModelParams, TrainConfig};
use crate::constraints::{ConstraintSet, FairnessNotion};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};

/// Bound on the exponent before `exp`, so weights stay finite and nonzero.
pub const EXPONENT_CLAMP: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Multipliers {
    Single { lambda: Vec<f64> },
    Paired { lambda_tp: Vec<f64>, lambda_fp: Vec<f64> },
}

impl Multipliers {
    /// All-zero multipliers shaped for `notion` over `k` groups.
    pub fn zeros(notion: FairnessNotion, k: usize) -> Self {
        match notion {
            FairnessNotion::EqualizedOdds => Multipliers::Paired {
                lambda_tp: vec![0.0; k],
                lambda_fp: vec![0.0; k],
            },
            _ => Multipliers::Single {
                lambda: vec![0.0; k],
            },
        }
    }

    pub fn group_count(&self) -> usize {
        match self {
            Multipliers::Single { lambda } => lambda.len(),
            Multipliers::Paired { lambda_tp, .. } => lambda_tp.len(),
        }
    }

    /// Flattened in violation-vector order (TP block first when paired).
    pub fn as_vec(&self) -> Vec<f64> {
        match self {
            Multipliers::Single { lambda } => lambda.clone(),
            Multipliers::Paired {
                lambda_tp,
                lambda_fp,
            } => lambda_tp.iter().chain(lambda_fp).copied().collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_vec().iter().all(|v| v.is_finite())
    }

    /// Weight of an example with this membership and label.
    pub fn weight(&self, membership: &[u8], label: u8) -> f64 {
        match self {
            Multipliers::Single { lambda } => example_weight(lambda, membership, label),
            Multipliers::Paired {
                lambda_tp,
                lambda_fp,
            } => example_weight_eqodds(lambda_tp, lambda_fp, membership, label),
        }
    }

    /// One weight per example of `ds`.
    pub fn weights(&self, ds: &LabeledDataset) -> Vec<f64> {
        (0..ds.len())
            .map(|i| self.weight(&ds.membership(i), ds.labels()[i]))
            .collect()
    }
}

/// `Σ_k λ_k g_k`, clamped to `±EXPONENT_CLAMP`.
pub fn membership_exponent(lambda: &[f64], membership: &[u8]) -> f64 {
    lambda
        .iter()
        .zip(membership)
        .map(|(l, &g)| l * f64::from(g))
        .sum::<f64>()
        .clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP)
}

pub fn example_weight(lambda: &[f64], membership: &[u8], label: u8) -> f64 {
    let w = membership_exponent(lambda, membership).exp();
    if label == 1 {
        w / (1.0 + w)
    } else {
        1.0 / (1.0 + w)
    }
}

pub fn example_weight_eqodds(lambda_tp: &[f64], lambda_fp: &[f64], membership: &[u8], label: u8) -> f64 {
    if label == 1 {
        let w = membership_exponent(lambda_tp, membership).exp();
        w / (1.0 + w)
    } else {
        let w = (-membership_exponent(lambda_fp, membership)).exp();
        w / (1.0 + w)
    }
}

/// `λ ← λ - η·Δ`, each block of paired multipliers against its own half of
/// `delta`.
pub fn update_multipliers(lam: &Multipliers, delta: &[f64], eta: f64) -> Result<Multipliers> {
    let k = lam.group_count();
    let expected = match lam {
        Multipliers::Single { .. } => k,
        Multipliers::Paired { .. } => 2 * k,
    };
    if delta.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: delta.len(),
        });
    }
    let step = |values: &[f64], d: &[f64]| -> Vec<f64> {
        values.iter().zip(d).map(|(l, d)| l - eta * d).collect()
    };
    Ok(match lam {
        Multipliers::Single { lambda } => Multipliers::Single {
            lambda: step(lambda, delta),
        },
        Multipliers::Paired {
            lambda_tp,
            lambda_fp,
        } => Multipliers::Paired {
            lambda_tp: step(lambda_tp, &delta[..k]),
            lambda_fp: step(lambda_fp, &delta[k..]),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReweighConfig {
    pub eta: f64,
    pub loops: usize,
}

impl Default for ReweighConfig {
    fn default() -> Self {
        Self { eta: 1.0, loops: 100 }
    }
}

impl ReweighConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }
}

/// How the multipliers are turned into a training signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Technique {
    /// Train on every example with its closed-form weight.
    Weighting,
    /// Keep each example with probability equal to its weight (unit weight),
    /// drawing a fresh mask every loop from `seed + loop index`.
    Sampling { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelParams,
    pub multipliers: Multipliers,
    /// Violation of every model the loop trained, the unconstrained model
    /// first and the returned model last (`loops + 1` entries).
    pub trace: Vec<Vec<f64>>,
}

pub fn fit(
    ds: &LabeledDataset,
    cs: &ConstraintSet,
    rcfg: &ReweighConfig,
    tcfg: &TrainConfig,
) -> Result<FitResult> {
    fit_with(ds, cs, rcfg, tcfg, Technique::Weighting)
}

/// The multiplier-learning loop: start from `λ = 0` and unit weights, then
/// `loops` times evaluate the violation of the current model on its
/// probabilistic scores, step the multipliers against it, recompute every
/// weight and retrain from scratch.
pub fn fit_with(
    ds: &LabeledDataset,
    cs: &ConstraintSet,
    rcfg: &ReweighConfig,
    tcfg: &TrainConfig,
    technique: Technique,
) -> Result<FitResult> {
    rcfg.validate()?;
    if cs.group_count() != ds.group_count() {
        return Err(Error::DimensionMismatch {
            expected: cs.group_count(),
            actual: ds.group_count(),
        });
    }
    let at_loop = |iteration: usize| move |source: Error| Error::LoopIteration {
        iteration,
        source: Box::new(source),
    };

    let mut multipliers = Multipliers::zeros(cs.notion(), cs.group_count());
    let mut model = train_weighted(ds, &vec![1.0; ds.len()], tcfg).map_err(at_loop(0))?;
    let mut trace = Vec::with_capacity(rcfg.loops + 1);

    for t in 1..=rcfg.loops {
        let scores = predict_proba(&model, ds.features())?;
        let delta = cs.violation(ds, &scores)?;
        multipliers = update_multipliers(&multipliers, &delta, rcfg.eta)?;
        trace.push(delta);

        let weights = match technique {
            Technique::Weighting => multipliers.weights(ds),
            Technique::Sampling { seed } => sampling_mask(&multipliers, ds, seed.wrapping_add(t as u64))
                .into_iter()
                .map(f64::from)
                .collect(),
        };
        model = train_weighted(ds, &weights, tcfg).map_err(at_loop(t))?;
    }
    let scores = predict_proba(&model, ds.features())?;
    trace.push(cs.violation(ds, &scores)?);

    Ok(FitResult {
        model,
        multipliers,
        trace,
    })
}

/// Accept/reject alternative to weighting: example `i` is kept iff an
/// auxiliary label drawn with `P(y' = 1) = weight(g_i, 1)` equals `y_i`.
/// With paired multipliers the two label weights need not sum to one, so an
/// example is kept with probability `weight(g_i, y_i)` directly.
pub fn sampling_mask(lam: &Multipliers, ds: &LabeledDataset, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..ds.len())
        .map(|i| {
            let membership = ds.membership(i);
            let y = ds.labels()[i];
            let u: f64 = rng.random();
            match lam {
                Multipliers::Single { .. } => {
                    let drawn = u8::from(u < lam.weight(&membership, 1));
                    u8::from(drawn == y)
                }
                Multipliers::Paired { .. } => u8::from(u < lam.weight(&membership, y)),
            }
        })
        .collect()
}
