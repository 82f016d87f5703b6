mod common;

use corrfp::correlation::{CorrelationModel, SyntheticModel};
use corrfp::fingerprint::{assign_probabilities, fingerprint_alg1, PositionContext};
use corrfp::{Alphabet, FingerprintParams, Sequence};
use proptest::prelude::*;

fn three() -> Alphabet {
    Alphabet::new(3).unwrap()
}

#[test]
fn toy_copy_under_frozen_seed() {
    let x = Sequence::new(vec![1, 2, 0, 2, 1, 0, 2, 2, 1, 1, 1, 0], three()).unwrap();
    let model = CorrelationModel::uniform(12, 3).unwrap();
    let params = FingerprintParams::new(0.5, 0.5, 0.05).unwrap();
    let g = fingerprint_alg1(&x, &params, &model, 157_641).unwrap();
    assert_eq!(g.copy.values(), &[1, 0, 1, 2, 2, 2, 2, 1, 1, 1, 0, 0]);
    assert_eq!(g.fingerprint.positions, vec![1, 2, 4, 5, 7, 10]);
    assert_eq!(g.degenerate, 0);
}

#[test]
fn mean_count_tracks_p_on_uniform_model() {
    let l = 10_000;
    let model = CorrelationModel::uniform(l, 3).unwrap();
    let params = FingerprintParams::new(0.1, 0.5, 0.05).unwrap();
    let total: usize = (0..100)
        .map(|s| {
            let x = model.sample_sequence(1_000 + s);
            fingerprint_alg1(&x, &params, &model, s).unwrap().count()
        })
        .sum();
    let mean = total as f64 / 100.0;
    assert!((mean - 1000.0).abs() <= 20.0, "mean count {mean}");
}

#[test]
fn rate_adjustment_narrows_the_count() {
    let l = 1000;
    let model = CorrelationModel::uniform(l, 3).unwrap();
    let x = model.sample_sequence(5);
    let spread = |theta: f64| {
        let params = FingerprintParams::new(0.1, theta, 0.05).unwrap();
        let counts: Vec<f64> = (0..400)
            .map(|s| fingerprint_alg1(&x, &params, &model, s).unwrap().count() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64).sqrt()
    };
    let (free, adjusted) = (spread(0.0), spread(0.5));
    assert!(
        adjusted < free / 2.0,
        "std {adjusted} with adjustment, {free} without"
    );
}

fn random_row(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, m).prop_filter_map("zero row", |w| {
        let t: f64 = w.iter().sum();
        (t > 1e-6).then(|| w.iter().map(|v| v / t).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn copies_respect_tau(seed in 0u64..10_000, tau in 0.0f64..0.3) {
        let model = CorrelationModel::synthetic(&SyntheticModel::new(200, seed)).unwrap();
        let x = model.sample_sequence(seed + 1);
        let params = FingerprintParams::new(0.2, 0.5, tau).unwrap();
        let g = fingerprint_alg1(&x, &params, &model, seed + 2).unwrap();
        prop_assume!(g.degenerate == 0);
        let y = g.copy.values();
        for j in 1..y.len() {
            prop_assert!(model.cond(j, y[j - 1], y[j]) >= tau, "position {j}");
        }
    }

    #[test]
    fn assignment_matches_the_ladder(
        row in random_row(4),
        next in prop::collection::vec(random_row(4), 4),
        truth in 0i32..4,
        next_fixed in prop::option::of(0i32..4),
        prob in 0.0f64..1.0,
        tau in 0.0f64..0.4,
    ) {
        // three points: every state leads into position 1 by `row`
        let col: Vec<f64> = next_fixed.map(|nf| next.iter().map(|r| r[nf as usize]).collect()).unwrap_or_default();
        let model = CorrelationModel::new(vec![0.25; 4], vec![vec![row.clone(); 4], next]).unwrap();
        let ctx = PositionContext { j: 1, original: truth, prev_shared: 0, next_fixed };
        let got = assign_probabilities(&model, ctx, prob, tau);
        match common::ladder(&row, next_fixed.map(|_| &col[..]), truth as usize, prob, tau) {
            None => {
                prop_assert!(got.degenerate);
                prop_assert_eq!(got.probs, row);
            }
            Some(want) => {
                prop_assert!(!got.degenerate);
                for (g, w) in got.probs.iter().zip(&want) {
                    prop_assert!((g - w).abs() < 1e-12, "{:?} vs {:?}", got.probs, want);
                }
            }
        }
    }
}
