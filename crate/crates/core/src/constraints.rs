//! Per-group fairness constraint functions, empirical base rates and
//! violation evaluation.
//!
//! Every implemented constraint satisfies `c_k(x, 0) = 0`, so a violation is
//! the dataset mean of `score_i * c_k(x_i, 1)`. Constraints that need the true
//! label use the observed label in its place.

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessNotion {
    DemographicParity,
    /// Demographic parity for a classifier that does not see the protected
    /// features; the constraints are identical, only the inputs differ.
    DisparateImpact,
    EqualOpportunity,
    EqualizedOdds,
}

impl FairnessNotion {
    pub fn as_str(self) -> &'static str {
        match self {
            FairnessNotion::DemographicParity => "demographic_parity",
            FairnessNotion::DisparateImpact => "disparate_impact",
            FairnessNotion::EqualOpportunity => "equal_opportunity",
            FairnessNotion::EqualizedOdds => "equalized_odds",
        }
    }

    /// Number of constraints per protected group.
    pub fn blocks(self) -> usize {
        match self {
            FairnessNotion::EqualizedOdds => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for FairnessNotion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Empirical group frequencies `z`, positive rate `p_x` and
/// positive-and-in-group rates `p_g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseRates {
    pub z: Vec<f64>,
    pub p_x: f64,
    pub p_g: Vec<f64>,
}

pub fn base_rates(ds: &LabeledDataset) -> Result<BaseRates> {
    let n = ds.len() as f64;
    let labels = ds.labels();
    let p_x = labels.iter().map(|&y| f64::from(y)).sum::<f64>() / n;
    if p_x <= 0.0 || p_x >= 1.0 {
        return Err(Error::DegenerateRate {
            what: "positive-label rate".into(),
            value: p_x,
        });
    }
    let mut z = Vec::with_capacity(ds.group_count());
    let mut p_g = Vec::with_capacity(ds.group_count());
    for (k, column) in ds.groups().columns().into_iter().enumerate() {
        let zk = column.iter().map(|&g| f64::from(g)).sum::<f64>() / n;
        if zk <= 0.0 || zk >= 1.0 {
            return Err(Error::DegenerateRate {
                what: format!("frequency of group `{}`", ds.group_names()[k]),
                value: zk,
            });
        }
        let pg = column
            .iter()
            .zip(labels)
            .map(|(&g, &y)| f64::from(g * y))
            .sum::<f64>()
            / n;
        z.push(zk);
        p_g.push(pg);
    }
    Ok(BaseRates { z, p_x, p_g })
}

/// The constraint family for one notion over `K` groups, with frozen rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    notion: FairnessNotion,
    rates: BaseRates,
}

impl ConstraintSet {
    /// Checks that every denominator the notion divides by is nonzero.
    pub fn new(notion: FairnessNotion, rates: BaseRates) -> Result<Self> {
        if rates.z.len() != rates.p_g.len() {
            return Err(Error::DimensionMismatch {
                expected: rates.z.len(),
                actual: rates.p_g.len(),
            });
        }
        if rates.z.is_empty() {
            return Err(Error::InvalidConfig("constraint set needs at least one group".into()));
        }
        if !(rates.p_x > 0.0 && rates.p_x < 1.0) {
            return Err(Error::DegenerateRate {
                what: "positive-label rate".into(),
                value: rates.p_x,
            });
        }
        for (k, (&z, &pg)) in rates.z.iter().zip(&rates.p_g).enumerate() {
            if !(z > 0.0 && z < 1.0) {
                return Err(Error::DegenerateRate {
                    what: format!("frequency of group {k}"),
                    value: z,
                });
            }
            if !(0.0..=z).contains(&pg) {
                return Err(Error::DegenerateRate {
                    what: format!("positive-and-in-group rate of group {k}"),
                    value: pg,
                });
            }
            let needs_positive = matches!(
                notion,
                FairnessNotion::EqualOpportunity | FairnessNotion::EqualizedOdds
            );
            if needs_positive && pg <= 0.0 {
                return Err(Error::DegenerateRate {
                    what: format!("positive-and-in-group rate of group {k} (no positive members)"),
                    value: pg,
                });
            }
            if notion == FairnessNotion::EqualizedOdds && pg >= z {
                return Err(Error::DegenerateRate {
                    what: format!("negative-and-in-group rate of group {k} (Z_G = P_G)"),
                    value: z - pg,
                });
            }
        }
        Ok(Self { notion, rates })
    }

    pub fn from_dataset(notion: FairnessNotion, ds: &LabeledDataset) -> Result<Self> {
        Self::new(notion, base_rates(ds)?)
    }

    pub fn notion(&self) -> FairnessNotion {
        self.notion
    }

    pub fn rates(&self) -> &BaseRates {
        &self.rates
    }

    pub fn group_count(&self) -> usize {
        self.rates.z.len()
    }

    /// Length of a violation vector: `K`, or `2K` for equalized odds.
    pub fn violation_len(&self) -> usize {
        self.group_count() * self.notion.blocks()
    }

    fn check_group(&self, k: usize) -> Result<()> {
        if k >= self.group_count() {
            return Err(Error::DimensionMismatch {
                expected: self.group_count(),
                actual: k,
            });
        }
        Ok(())
    }

    /// `c_k(x, candidate)` of the notion's primary constraint (the
    /// true-positive block for equalized odds).
    pub fn value(&self, k: usize, in_group: u8, observed_label: u8, candidate: u8) -> Result<f64> {
        self.check_group(k)?;
        if candidate == 0 {
            return Ok(0.0);
        }
        let g = f64::from(in_group);
        let y = f64::from(observed_label);
        let r = &self.rates;
        Ok(match self.notion {
            FairnessNotion::DemographicParity | FairnessNotion::DisparateImpact => g / r.z[k] - 1.0,
            FairnessNotion::EqualOpportunity | FairnessNotion::EqualizedOdds => {
                g * y / r.p_g[k] - y / r.p_x
            }
        })
    }

    /// `c_k^FP(x, candidate)`, the false-positive block of equalized odds.
    pub fn false_positive_value(
        &self,
        k: usize,
        in_group: u8,
        observed_label: u8,
        candidate: u8,
    ) -> Result<f64> {
        self.check_group(k)?;
        if self.notion != FairnessNotion::EqualizedOdds {
            return Err(Error::UnsupportedNotion {
                notion: self.notion.as_str(),
                operation: "false-positive constraints",
            });
        }
        let r = &self.rates;
        let negatives_in_group = r.z[k] - r.p_g[k];
        if negatives_in_group <= 0.0 {
            return Err(Error::DegenerateRate {
                what: format!("negative-and-in-group rate of group {k} (Z_G = P_G)"),
                value: negatives_in_group,
            });
        }
        if candidate == 0 {
            return Ok(0.0);
        }
        let g = f64::from(in_group);
        let not_y = 1.0 - f64::from(observed_label);
        Ok(g * not_y / negatives_in_group - not_y / (1.0 - r.p_x))
    }

    /// `c(x_i, 1)` for every constraint in violation-vector order.
    pub fn row_values(&self, membership: &[u8], observed_label: u8) -> Vec<f64> {
        let k_count = self.group_count();
        let mut out = Vec::with_capacity(self.violation_len());
        for k in 0..k_count {
            out.push(
                self.value(k, membership[k], observed_label, 1)
                    .expect("group index in range"),
            );
        }
        if self.notion == FairnessNotion::EqualizedOdds {
            for k in 0..k_count {
                out.push(
                    self.false_positive_value(k, membership[k], observed_label, 1)
                        .expect("rates checked at construction"),
                );
            }
        }
        out
    }

    /// `Δ_k = (1/n) Σ_i scores_i · c_k(x_i, 1)`, equalized odds ordered as the
    /// true-positive block followed by the false-positive block.
    pub fn violation(&self, ds: &LabeledDataset, scores: &[f64]) -> Result<Vec<f64>> {
        if scores.len() != ds.len() {
            return Err(Error::DimensionMismatch {
                expected: ds.len(),
                actual: scores.len(),
            });
        }
        if ds.group_count() != self.group_count() {
            return Err(Error::DimensionMismatch {
                expected: self.group_count(),
                actual: ds.group_count(),
            });
        }
        let mut delta = vec![0.0; self.violation_len()];
        for (i, &s) in scores.iter().enumerate() {
            let row = self.row_values(&ds.membership(i), ds.labels()[i]);
            delta.iter_mut().zip(row).for_each(|(d, c)| *d += s * c);
        }
        let n = ds.len() as f64;
        delta.iter_mut().for_each(|d| *d /= n);
        Ok(delta)
    }
}

/// Largest absolute entry; the single-number violation reported per method.
pub fn max_abs(violations: &[f64]) -> f64 {
    violations.iter().fold(0.0, |m, v| m.max(v.abs()))
}
