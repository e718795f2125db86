mod common;

use common::{flat, max_abs_diff, random_dataset};
use debias_core::classifier::{
    objective, predict_proba, train_weighted, train_weighted_with_history, weighted_gradient, ModelParams,
    Solver, TrainConfig,
};
use debias_core::data::LabeledDataset;
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0.1..3.0)).collect()
}

fn random_params(d: usize, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ModelParams {
        coefficients: (0..d).map(|_| rng.random_range(-1.5..1.5)).collect(),
        intercept: rng.random_range(-1.0..1.0),
    }
}

#[test]
fn gradient_matches_central_differences() {
    let h = 1e-5;
    for seed in 0..10 {
        let ds = random_dataset(20, 4, 1, seed);
        let w = random_weights(20, seed + 100);
        let cfg = TrainConfig {
            l2_strength: 0.05,
            ..TrainConfig::default()
        };
        let m = random_params(4, seed + 200);
        let analytic = weighted_gradient(&m, &ds, &w, &cfg).unwrap();
        let theta = flat(&m);
        for j in 0..theta.len() {
            let at = |delta: f64| {
                let mut t = theta.clone();
                t[j] += delta;
                let (c, b) = t.split_at(t.len() - 1);
                let p = ModelParams {
                    coefficients: c.to_vec(),
                    intercept: b[0],
                };
                objective(&p, &ds, &w, &cfg).unwrap()
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            let rel = (analytic[j] - numeric).abs() / numeric.abs().max(analytic[j].abs()).max(1e-8);
            assert!(rel < 1e-4, "seed {seed} coord {j}: {} vs {numeric}", analytic[j]);
        }
    }
}

#[test]
fn all_positive_labels_intercept_gradient() {
    // d/db of mean logloss at zero params is mean(σ(0) - y) = -0.5
    let ds = random_dataset(10, 2, 1, 3).with_labels(vec![1; 10]).unwrap();
    let g = weighted_gradient(&ModelParams::zeros(2), &ds, &[1.0; 10], &TrainConfig::default()).unwrap();
    assert!((g[2] + 0.5).abs() < 1e-12);
}

#[test]
fn weight_scaling_leaves_parameters_unchanged() {
    let ds = random_dataset(80, 3, 1, 11);
    let cfg = TrainConfig::default();
    let w = random_weights(80, 12);
    let base = train_weighted(&ds, &w, &cfg).unwrap();
    for scale in [2.0, 7.0] {
        let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
        let m = train_weighted(&ds, &scaled, &cfg).unwrap();
        assert!(max_abs_diff(&flat(&base), &flat(&m)) < 1e-9);
    }
    let uniform = train_weighted(&ds, &[1.0; 80], &cfg).unwrap();
    let doubled = train_weighted(&ds, &[2.0; 80], &cfg).unwrap();
    assert!(max_abs_diff(&flat(&uniform), &flat(&doubled)) < 1e-9);
}

#[test]
fn zero_weights_equal_training_on_complement() {
    let ds = random_dataset(60, 3, 1, 21);
    let cfg = TrainConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let dropped: Vec<bool> = (0..60).map(|_| rng.random::<f64>() < 0.3).collect();
    let w: Vec<f64> = dropped.iter().map(|&d| if d { 0.0 } else { 1.0 }).collect();
    let keep: Vec<usize> = (0..60).filter(|&i| !dropped[i]).collect();
    let sub = ds.select_rows(&keep);
    let a = train_weighted(&ds, &w, &cfg).unwrap();
    let b = train_weighted(&sub, &vec![1.0; sub.len()], &cfg).unwrap();
    assert!(max_abs_diff(&flat(&a), &flat(&b)) < 1e-6);
}

#[test]
fn separable_points_beat_zero_model() {
    let ds = LabeledDataset::new(
        array![[-2.0], [-1.0], [1.0], [2.0]],
        vec![0, 0, 1, 1],
        Array2::from_shape_vec((4, 1), vec![1, 0, 1, 0]).unwrap(),
        vec!["x".into()],
        vec!["g".into()],
    )
    .unwrap();
    let cfg = TrainConfig {
        l2_strength: 1.0,
        ..TrainConfig::default()
    };
    let w = [1.0; 4];
    let m = train_weighted(&ds, &w, &cfg).unwrap();
    assert!(objective(&m, &ds, &w, &cfg).unwrap() < objective(&ModelParams::zeros(1), &ds, &w, &cfg).unwrap());
}

#[test]
fn gradient_descent_is_monotone_and_converges() {
    let ds = random_dataset(100, 3, 1, 31);
    let w = random_weights(100, 32);
    let cfg = TrainConfig {
        solver: Solver::GradientDescent,
        step_size: 0.5,
        max_iterations: 20000,
        gradient_tolerance: 1e-7,
        l2_strength: 1e-3,
    };
    let (m, history) = train_weighted_with_history(&ds, &w, &cfg).unwrap();
    assert!(history.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    let g = weighted_gradient(&m, &ds, &w, &cfg).unwrap();
    assert!(g.iter().all(|v| v.abs() <= cfg.gradient_tolerance));

    let newton = train_weighted(&ds, &w, &TrainConfig { solver: Solver::Newton, ..cfg }).unwrap();
    assert!(max_abs_diff(&flat(&m), &flat(&newton)) < 1e-5);
}

#[test]
fn newton_reaches_gradient_tolerance() {
    let ds = random_dataset(200, 5, 2, 41);
    let w = random_weights(200, 42);
    let cfg = TrainConfig::default();
    let (m, history) = train_weighted_with_history(&ds, &w, &cfg).unwrap();
    assert!(history.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    let g = weighted_gradient(&m, &ds, &w, &cfg).unwrap();
    assert!(g.iter().all(|v| v.abs() <= cfg.gradient_tolerance));
}

#[test]
fn training_is_deterministic() {
    let ds = random_dataset(100, 4, 1, 51);
    let w = random_weights(100, 52);
    for solver in [Solver::Newton, Solver::GradientDescent] {
        let cfg = TrainConfig {
            solver,
            ..TrainConfig::default()
        };
        assert_eq!(train_weighted(&ds, &w, &cfg).unwrap(), train_weighted(&ds, &w, &cfg).unwrap());
    }
}

#[test]
fn probability_edge_cases() {
    let x = array![[1.0, -2.0], [0.5, 3.0]];
    let zero = predict_proba(&ModelParams::zeros(2), &x).unwrap();
    assert_eq!(zero, vec![0.5, 0.5]);
    let saturated = ModelParams {
        coefficients: vec![0.0, 0.0],
        intercept: 1e3,
    };
    assert!(predict_proba(&saturated, &x).unwrap().iter().all(|&p| p > 0.999));
    let m = ModelParams {
        coefficients: vec![0.7, -0.3],
        intercept: 0.0,
    };
    let p = predict_proba(&m, &x).unwrap();
    let q = predict_proba(&m, &x.mapv(|v| -v)).unwrap();
    assert!(p.iter().zip(&q).all(|(a, b)| (a + b - 1.0).abs() < 1e-12));
}

#[test]
fn rejects_bad_weights() {
    let ds = random_dataset(10, 2, 1, 61);
    let cfg = TrainConfig::default();
    assert!(train_weighted(&ds, &[0.0; 10], &cfg).is_err());
    let mut w = vec![1.0; 10];
    w[3] = f64::NAN;
    assert!(train_weighted(&ds, &w, &cfg).is_err());
    assert!(train_weighted(&ds, &[1.0; 9], &cfg).is_err());
}
