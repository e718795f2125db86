//! Label-bias correction for binary classification by re-weighting training
//! examples.
//!
//! Observed labels are modelled as an exponentially tilted version of unbiased
//! labels, with one coefficient per protected-group fairness constraint.
//! Training on examples weighted by the inverse tilt is equivalent to training
//! on the unbiased labels; [`reweigher::fit`] learns the coefficients by
//! alternating weighted retraining with constraint-violation updates.

pub mod baselines;
pub mod biasgen;
pub mod classifier;
pub mod constraints;
pub mod data;
pub mod error;
pub mod reweigher;

pub use error::{Error, Result};
