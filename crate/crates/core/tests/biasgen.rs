use debias_core::biasgen::{bias_score, debias_check, debias_score, generate, BiasSpec, GeneratorConfig};
use debias_core::constraints::FairnessNotion;
use proptest::prelude::*;

fn config(lambda_star: Vec<f64>, n: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n,
        d: 3,
        group_fraction: 0.4,
        bias: BiasSpec {
            lambda_star,
            notion: FairnessNotion::DemographicParity,
            seed,
        },
    }
}

#[test]
fn closed_form_values() {
    assert_eq!(bias_score(0.3, &[0.0], &[1.0], &[0.0]), 0.3);
    assert!((bias_score(0.5, &[3f64.ln()], &[1.0], &[0.0]) - 0.25).abs() < 1e-12);
    assert_eq!(bias_score(1.0, &[2.5], &[1.0], &[0.0]), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn debias_inverts_bias(
        t in 0.0f64..=1.0,
        (lambda, membership) in (1usize..5).prop_flat_map(|k| (
            proptest::collection::vec(-3.0f64..3.0, k),
            proptest::collection::vec(0u8..=1, k),
        ))
    ) {
        let c1: Vec<f64> = membership.iter().map(|&g| f64::from(g)).collect();
        let c0 = vec![0.0; c1.len()];
        let b = bias_score(t, &lambda, &c1, &c0);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!((debias_score(b, &lambda, &c1, &c0) - t).abs() < 1e-12);
    }
}

#[test]
fn debias_check_cases() {
    let task = generate(&config(vec![1.2, -0.7], 2000, 1)).unwrap();
    assert!(debias_check(&task, &[1.2, -0.7]) < 1e-12);
    let gap = task
        .bias_scores
        .iter()
        .zip(&task.true_scores)
        .map(|(b, t)| (b - t).abs())
        .fold(0.0, f64::max);
    assert!(gap > 0.0);
    assert_eq!(debias_check(&task, &[0.0, 0.0]), gap);

    let unbiased = generate(&config(vec![0.0], 500, 2)).unwrap();
    assert_eq!(debias_check(&unbiased, &[0.0]), 0.0);
}

#[test]
fn unbiased_labels_follow_true_scores() {
    let task = generate(&config(vec![0.0], 50_000, 3)).unwrap();
    let n = task.dataset.len() as f64;
    let label_mean = task.dataset.labels().iter().map(|&y| f64::from(y)).sum::<f64>() / n;
    let score_mean = task.true_scores.iter().sum::<f64>() / n;
    let se = task.true_scores.iter().map(|t| t * (1.0 - t)).sum::<f64>().sqrt() / n;
    assert!((label_mean - score_mean).abs() <= 3.0 * se);
}

#[test]
fn positive_multiplier_suppresses_member_positives() {
    // same seed: identical features, memberships and uniforms
    let biased = generate(&config(vec![2.0], 50_000, 4)).unwrap();
    let clean = generate(&config(vec![0.0], 50_000, 4)).unwrap();
    assert_eq!(biased.dataset.features(), clean.dataset.features());
    let member_rate = |labels: &[u8]| {
        let rows: Vec<usize> = (0..biased.dataset.len()).filter(|&i| biased.dataset.groups()[(i, 0)] == 1).collect();
        rows.iter().map(|&i| f64::from(labels[i])).sum::<f64>() / rows.len() as f64
    };
    assert!(member_rate(biased.dataset.labels()) < member_rate(clean.dataset.labels()));
}

#[test]
fn labels_are_calibrated_to_bias_scores() {
    // ten bias-score bands: empirical positive rate within 3 standard errors
    let task = generate(&config(vec![1.5], 200_000, 5)).unwrap();
    let labels = task.dataset.labels();
    for band in 0..10 {
        let lo = band as f64 / 10.0;
        let rows: Vec<usize> = (0..labels.len())
            .filter(|&i| task.bias_scores[i] >= lo && task.bias_scores[i] < lo + 0.1)
            .collect();
        let m = rows.len() as f64;
        let freq = rows.iter().map(|&i| f64::from(labels[i])).sum::<f64>() / m;
        let expected = rows.iter().map(|&i| task.bias_scores[i]).sum::<f64>() / m;
        let se = rows.iter().map(|&i| task.bias_scores[i] * (1.0 - task.bias_scores[i])).sum::<f64>().sqrt() / m;
        assert!((freq - expected).abs() <= 3.0 * se, "band {band}: {freq} vs {expected} ± {se}");
    }
}

#[test]
fn generation_is_seeded() {
    let a = generate(&config(vec![1.0], 300, 6)).unwrap();
    let b = generate(&config(vec![1.0], 300, 6)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_other_notions() {
    let mut cfg = config(vec![1.0], 100, 7);
    cfg.bias.notion = FairnessNotion::EqualOpportunity;
    assert!(generate(&cfg).is_err());
}
