mod common;

use common::random_dataset;
use debias_core::baselines::train_unconstrained;
use debias_core::biasgen::{generate, BiasSpec, GeneratorConfig};
use debias_core::classifier::{predict_label, TrainConfig};
use debias_core::constraints::{max_abs, ConstraintSet, FairnessNotion};
use debias_core::data::LabeledDataset;
use debias_core::reweigher::{
    example_weight, example_weight_eqodds, fit, fit_with, sampling_mask, update_multipliers, Multipliers,
    ReweighConfig, Technique,
};
use ndarray::Array2;
use proptest::prelude::*;

fn membership_strategy(k: usize) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..=1, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn label_weights_are_complementary(
        (lambda, membership) in (1usize..6).prop_flat_map(|k| (
            proptest::collection::vec(-3.0f64..3.0, k),
            membership_strategy(k),
        ))
    ) {
        let w1 = example_weight(&lambda, &membership, 1);
        let w0 = example_weight(&lambda, &membership, 0);
        prop_assert!((w1 + w0 - 1.0).abs() < 1e-12);
        prop_assert!(w1 > 0.0 && w1 < 1.0);
    }

    #[test]
    fn positive_weight_follows_exponent_sign(
        (lambda, membership) in (1usize..6).prop_flat_map(|k| (
            proptest::collection::vec(-3.0f64..3.0, k),
            membership_strategy(k),
        ))
    ) {
        let s: f64 = lambda.iter().zip(&membership).map(|(l, &g)| l * f64::from(g)).sum();
        let w1 = example_weight(&lambda, &membership, 1);
        if s > 1e-9 {
            prop_assert!(w1 > 0.5);
        } else if s < -1e-9 {
            prop_assert!(w1 < 0.5);
        }
    }

    #[test]
    fn paired_weights_read_their_own_block(
        (tp, fp, membership) in (1usize..5).prop_flat_map(|k| (
            proptest::collection::vec(-3.0f64..3.0, k),
            proptest::collection::vec(-3.0f64..3.0, k),
            membership_strategy(k),
        ))
    ) {
        prop_assert_eq!(example_weight_eqodds(&tp, &fp, &membership, 1), example_weight(&tp, &membership, 1));
        let neg_fp: Vec<f64> = fp.iter().map(|l| -l).collect();
        prop_assert!((example_weight_eqodds(&tp, &fp, &membership, 0) - example_weight(&neg_fp, &membership, 1)).abs() < 1e-15);
    }

    #[test]
    fn zero_violation_is_a_fixed_point(lambda in proptest::collection::vec(-5.0f64..5.0, 1..6), eta in 0.01f64..10.0) {
        let lam = Multipliers::Single { lambda: lambda.clone() };
        let out = update_multipliers(&lam, &vec![0.0; lambda.len()], eta).unwrap();
        prop_assert_eq!(out, lam);
    }
}

fn cell_dataset(per_cell: usize) -> LabeledDataset {
    // single group; cells (g, y) in order 00, 01, 10, 11
    let n = 4 * per_cell;
    let cell = |i: usize| i / per_cell;
    LabeledDataset::new(
        Array2::zeros((n, 1)),
        (0..n).map(|i| (cell(i) % 2) as u8).collect(),
        Array2::from_shape_fn((n, 1), |(i, _)| (cell(i) / 2) as u8),
        vec!["x".into()],
        vec!["g".into()],
    )
    .unwrap()
}

fn assert_acceptance_matches(lam: &Multipliers, per_cell: usize, seed: u64) {
    let ds = cell_dataset(per_cell);
    let mask = sampling_mask(lam, &ds, seed);
    for c in 0..4 {
        let rows = c * per_cell..(c + 1) * per_cell;
        let kept = mask[rows.clone()].iter().filter(|&&m| m == 1).count() as f64 / per_cell as f64;
        let g = (c / 2) as u8;
        let y = (c % 2) as u8;
        let p = lam.weight(&[g], y);
        let se = (p * (1.0 - p) / per_cell as f64).sqrt();
        assert!((kept - p).abs() <= 3.0 * se, "cell g={g} y={y}: kept {kept}, expected {p} ± {se}");
    }
}

#[test]
fn sampling_frequencies_match_weights() {
    assert_acceptance_matches(&Multipliers::Single { lambda: vec![3f64.ln()] }, 100_000, 1);
    assert_acceptance_matches(&Multipliers::Single { lambda: vec![-0.8] }, 100_000, 2);
    assert_acceptance_matches(
        &Multipliers::Paired {
            lambda_tp: vec![0.6],
            lambda_fp: vec![-1.1],
        },
        100_000,
        3,
    );
}

#[test]
fn zero_multipliers_keep_half() {
    let ds = random_dataset(100_000, 1, 2, 9);
    let mask = sampling_mask(&Multipliers::zeros(FairnessNotion::DemographicParity, 2), &ds, 10);
    let kept = mask.iter().filter(|&&m| m == 1).count() as f64 / 100_000.0;
    assert!((kept - 0.5).abs() < 0.005, "{kept}");
}

#[test]
fn sampling_mask_is_seeded() {
    let ds = random_dataset(500, 1, 1, 4);
    let lam = Multipliers::Single { lambda: vec![0.4] };
    assert_eq!(sampling_mask(&lam, &ds, 5), sampling_mask(&lam, &ds, 5));
    assert_ne!(sampling_mask(&lam, &ds, 5), sampling_mask(&lam, &ds, 6));
}

#[test]
fn zero_loops_return_unconstrained_model() {
    let ds = random_dataset(120, 3, 2, 12);
    let tcfg = TrainConfig::default();
    for notion in [FairnessNotion::DemographicParity, FairnessNotion::EqualizedOdds] {
        let cs = ConstraintSet::from_dataset(notion, &ds).unwrap();
        let out = fit(&ds, &cs, &ReweighConfig { eta: 1.0, loops: 0 }, &tcfg).unwrap();
        assert_eq!(out.model, train_unconstrained(&ds, &tcfg).unwrap());
        assert_eq!(out.multipliers, Multipliers::zeros(notion, 2));
        assert_eq!(out.trace.len(), 1);
    }
}

#[test]
fn already_fair_data_is_a_fixed_point() {
    // every row appears once inside and once outside the group, and the group
    // is not a feature, so any model has exactly zero parity violation
    let base = random_dataset(40, 2, 1, 13);
    let rows: Vec<usize> = (0..40).flat_map(|i| [i, i]).collect();
    let dup = base.select_rows(&rows);
    let ds = LabeledDataset::new(
        dup.features().clone(),
        dup.labels().to_vec(),
        Array2::from_shape_fn((80, 1), |(i, _)| (i % 2) as u8),
        dup.feature_names().to_vec(),
        vec!["g".into()],
    )
    .unwrap();
    let cs = ConstraintSet::from_dataset(FairnessNotion::DemographicParity, &ds).unwrap();
    let tcfg = TrainConfig::default();
    let out = fit(&ds, &cs, &ReweighConfig { eta: 1.0, loops: 5 }, &tcfg).unwrap();
    assert_eq!(out.multipliers, Multipliers::Single { lambda: vec![0.0] });
    assert_eq!(out.model, train_unconstrained(&ds, &tcfg).unwrap());
    assert_eq!(out.trace.len(), 6);
}

#[test]
fn fit_removes_synthetic_parity_bias() {
    let task = generate(&GeneratorConfig {
        n: 10_000,
        d: 3,
        group_fraction: 0.3,
        bias: BiasSpec {
            lambda_star: vec![1.0],
            notion: FairnessNotion::DemographicParity,
            seed: 17,
        },
    })
    .unwrap();
    let ds = &task.dataset;
    let cs = ConstraintSet::from_dataset(FairnessNotion::DemographicParity, ds).unwrap();
    let tcfg = TrainConfig::default();
    let hard_violation = |m| {
        let preds: Vec<f64> = predict_label(m, ds.features()).unwrap().into_iter().map(f64::from).collect();
        max_abs(&cs.violation(ds, &preds).unwrap())
    };
    let base = train_unconstrained(ds, &tcfg).unwrap();
    let out = fit(ds, &cs, &ReweighConfig::default(), &tcfg).unwrap();
    let before = hard_violation(&base);
    let after = hard_violation(&out.model);
    assert!(after <= 0.02 && after < before, "{after} vs {before}");
    assert_eq!(out.trace.len(), 101);
}

#[test]
fn sampling_fit_is_reproducible() {
    let ds = random_dataset(300, 2, 1, 14);
    let cs = ConstraintSet::from_dataset(FairnessNotion::DemographicParity, &ds).unwrap();
    let rcfg = ReweighConfig { eta: 1.0, loops: 5 };
    let tcfg = TrainConfig::default();
    let a = fit_with(&ds, &cs, &rcfg, &tcfg, Technique::Sampling { seed: 3 }).unwrap();
    let b = fit_with(&ds, &cs, &rcfg, &tcfg, Technique::Sampling { seed: 3 }).unwrap();
    assert_eq!(a, b);
}
