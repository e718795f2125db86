//! Comparison methods: plain logistic regression, and post-hoc per-cell
//! decision thresholds on top of it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::{predict_proba, train_weighted, ModelParams, TrainConfig};
use crate::constraints::{max_abs, ConstraintSet, FairnessNotion};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};

/// Cells with fewer training examples keep the default threshold.
pub const MIN_CELL_SIZE: usize = 5;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
const MAX_SWEEPS: usize = 50;
const IMPROVEMENT_TOL: f64 = 1e-12;

pub fn train_unconstrained(ds: &LabeledDataset, tcfg: &TrainConfig) -> Result<ModelParams> {
    train_weighted(ds, &vec![1.0; ds.len()], tcfg)
}

/// `"1010"` for membership `(1, 0, 1, 0)`.
pub fn signature(membership: &[u8]) -> String {
    membership.iter().map(|g| if *g == 1 { '1' } else { '0' }).collect()
}

/// A base model with one decision threshold per group-intersection cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedModel {
    pub base: ModelParams,
    /// Keyed by membership [`signature`].
    pub thresholds: BTreeMap<String, f64>,
}

impl CalibratedModel {
    pub fn threshold(&self, membership: &[u8]) -> f64 {
        self.thresholds
            .get(&signature(membership))
            .copied()
            .unwrap_or(DEFAULT_THRESHOLD)
    }

    /// 1 iff the base probability reaches the example's cell threshold.
    pub fn predict_label(&self, ds: &LabeledDataset) -> Result<Vec<u8>> {
        let probs = predict_proba(&self.base, ds.features())?;
        Ok(probs
            .iter()
            .enumerate()
            .map(|(i, &p)| u8::from(p >= self.threshold(&ds.membership(i))))
            .collect())
    }
}

struct Cell {
    key: String,
    /// Row indices sorted by descending probability.
    rows: Vec<usize>,
}

/// Picks per-cell thresholds minimizing the training max-violation of the
/// thresholded predictions.
///
/// Candidates for a cell are its distinct predicted probabilities plus 0.5.
/// Cells are optimized one at a time in signature order with the others held
/// fixed, sweeping until no cell changes. A cell only moves to a strictly
/// better threshold, or an equally good one closer to 0.5, so the result is
/// never worse than thresholding everything at 0.5.
pub fn calibrate(m: &ModelParams, ds: &LabeledDataset, cs: &ConstraintSet) -> Result<CalibratedModel> {
    match cs.notion() {
        FairnessNotion::DemographicParity | FairnessNotion::EqualOpportunity => {}
        other => {
            return Err(Error::UnsupportedNotion {
                notion: other.as_str(),
                operation: "calibration",
            })
        }
    }
    if cs.group_count() != ds.group_count() {
        return Err(Error::DimensionMismatch {
            expected: cs.group_count(),
            actual: ds.group_count(),
        });
    }
    let probs = predict_proba(m, ds.features())?;
    let n = ds.len() as f64;
    let row_values: Vec<Vec<f64>> = (0..ds.len())
        .map(|i| cs.row_values(&ds.membership(i), ds.labels()[i]))
        .collect();

    let mut by_signature: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for i in 0..ds.len() {
        by_signature.entry(signature(&ds.membership(i))).or_default().push(i);
    }
    let mut thresholds: BTreeMap<String, f64> =
        by_signature.keys().map(|k| (k.clone(), DEFAULT_THRESHOLD)).collect();
    let cells: Vec<Cell> = by_signature
        .into_iter()
        .filter(|(_, rows)| rows.len() >= MIN_CELL_SIZE)
        .map(|(key, mut rows)| {
            rows.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
            Cell { key, rows }
        })
        .collect();

    let dim = cs.violation_len();
    let contribution = |rows: &[usize], threshold: f64| -> Vec<f64> {
        let mut acc = vec![0.0; dim];
        for &i in rows.iter().take_while(|&&i| probs[i] >= threshold) {
            acc.iter_mut().zip(&row_values[i]).for_each(|(a, c)| *a += c / n);
        }
        acc
    };

    let mut delta = vec![0.0; dim];
    for i in 0..ds.len() {
        if probs[i] >= DEFAULT_THRESHOLD {
            delta.iter_mut().zip(&row_values[i]).for_each(|(d, c)| *d += c / n);
        }
    }

    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for cell in &cells {
            let current = thresholds[&cell.key];
            let current_part = contribution(&cell.rows, current);
            let rest: Vec<f64> = delta.iter().zip(&current_part).map(|(d, c)| d - c).collect();

            // (violation, threshold) for every candidate, via prefix sums
            let mut candidates: Vec<(f64, f64)> = Vec::new();
            let mut prefix = vec![0.0; dim];
            let mut idx = 0;
            while idx < cell.rows.len() {
                let t = probs[cell.rows[idx]];
                while idx < cell.rows.len() && probs[cell.rows[idx]] >= t {
                    let i = cell.rows[idx];
                    prefix.iter_mut().zip(&row_values[i]).for_each(|(a, c)| *a += c / n);
                    idx += 1;
                }
                let total: Vec<f64> = rest.iter().zip(&prefix).map(|(r, p)| r + p).collect();
                candidates.push((max_abs(&total), t));
            }
            let default_part = contribution(&cell.rows, DEFAULT_THRESHOLD);
            let total: Vec<f64> = rest.iter().zip(&default_part).map(|(r, p)| r + p).collect();
            candidates.push((max_abs(&total), DEFAULT_THRESHOLD));

            let current_total: Vec<f64> = rest.iter().zip(&current_part).map(|(r, p)| r + p).collect();
            let mut best = (max_abs(&current_total), current);
            for &(v, t) in &candidates {
                let closer = (t - DEFAULT_THRESHOLD).abs() < (best.1 - DEFAULT_THRESHOLD).abs();
                if v < best.0 - IMPROVEMENT_TOL || (v <= best.0 + IMPROVEMENT_TOL && closer) {
                    best = (v, t);
                }
            }
            if best.1 != current {
                let new_part = contribution(&cell.rows, best.1);
                delta = rest.iter().zip(&new_part).map(|(r, p)| r + p).collect();
                thresholds.insert(cell.key.clone(), best.1);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    Ok(CalibratedModel {
        base: m.clone(),
        thresholds,
    })
}
