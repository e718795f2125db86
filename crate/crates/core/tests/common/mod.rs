#![allow(dead_code)]

use debias_core::data::LabeledDataset;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Gaussian features, Bernoulli(0.5) memberships and labels from a noisy
/// linear rule. Redraws until every group has members and non-members and
/// both classes appear.
pub fn random_dataset(n: usize, d: usize, k: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let features = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
        let groups = Array2::from_shape_fn((n, k), |_| u8::from(rng.random::<f64>() < 0.5));
        let labels: Vec<u8> = (0..n)
            .map(|i| {
                let z: f64 = features.row(i).iter().enumerate().map(|(j, x)| x / (j + 1) as f64).sum();
                u8::from(z + rng.sample::<f64, _>(StandardNormal) > 0.0)
            })
            .collect();
        let feature_names = (0..d).map(|j| format!("x{j}")).collect();
        let group_names = (0..k).map(|g| format!("g{g}")).collect();
        if let Ok(ds) = LabeledDataset::new(features, labels, groups, feature_names, group_names) {
            return ds;
        }
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn flat(m: &debias_core::classifier::ModelParams) -> Vec<f64> {
    let mut v = m.coefficients.clone();
    v.push(m.intercept);
    v
}
