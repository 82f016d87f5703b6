mod common;

use corrfp::attacks::flipping_attack;
use corrfp::boneh_shaw::{share_all, BsConfig};
use corrfp::correlation::{CorrelationModel, SyntheticModel};
use corrfp::detection::{detect, probabilistic_scores, similarity_scores, Method};
use corrfp::fingerprint::fingerprint_naive;
use corrfp::{Alphabet, FingerprintParams, Sequence, SharingLedger, REMOVED};
use proptest::prelude::*;

fn naive_ledger(x: &Sequence, n: usize, p: f64, seed: u64) -> SharingLedger {
    let mut ledger =
        SharingLedger::new(x.clone(), FingerprintParams::new(p, 0.5, 0.0).unwrap()).unwrap();
    for i in 1..=n {
        let s = seed * 1000 + i as u64;
        let (_, record) = fingerprint_naive(x, p, s).unwrap().into_record(i, s, None);
        ledger.push(record).unwrap();
    }
    ledger
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn guilt_matches_direct_products(
        x in prop::collection::vec(0i32..3, 1..30),
        n in 1usize..6,
        p in 0.05f64..0.6,
        seed in 0u64..1000,
        leak_from in 0usize..6,
        removed in prop::collection::vec(any::<bool>(), 30),
    ) {
        let x = Sequence::new(x, Alphabet::new(3).unwrap()).unwrap();
        let ledger = naive_ledger(&x, n, p, seed);
        let mut values = ledger.reconstruct_copy(leak_from % n + 1).unwrap().into_values();
        for (v, &r) in values.iter_mut().zip(&removed) {
            if r {
                *v = REMOVED;
            }
        }
        let leaked = Sequence::leaked(values, x.alphabet()).unwrap();
        let got = probabilistic_scores(&ledger, &leaked).unwrap();
        let want = common::guilt_by_hand(&ledger, &leaked);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-9, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn similarity_is_the_matched_share(
        x in prop::collection::vec(0i32..3, 1..40),
        seed in 0u64..1000,
        p_f in 0.0f64..1.0,
    ) {
        let x = Sequence::new(x, Alphabet::new(3).unwrap()).unwrap();
        let ledger = naive_ledger(&x, 4, 0.3, seed);
        let leaked = flipping_attack(&ledger.reconstruct_copy(2).unwrap(), p_f, seed).unwrap();
        let got = similarity_scores(&ledger, &leaked).unwrap();
        for (record, g) in ledger.records().iter().zip(&got) {
            let f = record.fingerprint.positions.len();
            let matched = record
                .fingerprint
                .positions
                .iter()
                .zip(&record.fingerprint.values)
                .filter(|&(&j, &v)| leaked[j] == v)
                .count();
            let want = if f == 0 { 0.0 } else { matched as f64 / f as f64 };
            prop_assert_eq!(*g, want);
        }
    }
}

#[test]
fn every_method_names_the_owner_of_an_exact_copy() {
    let l = 1000;
    let model = CorrelationModel::synthetic(&SyntheticModel::new(l, 4)).unwrap();
    let x = model.sample_sequence(5);
    let params = FingerprintParams::new(0.1, 0.5, 0.05).unwrap();
    let ledger = share_all(
        &x,
        &params,
        &model,
        BsConfig::auto(10, 100.0).unwrap(),
        20,
        6,
    )
    .unwrap();
    for i in [1, 7, 20] {
        let copy = ledger.reconstruct_copy(i).unwrap();
        for method in [Method::Similarity, Method::Probabilistic, Method::Combined] {
            let r = detect(&ledger, &copy, method).unwrap();
            assert_eq!(r.accused, i, "{method} on copy {i}");
        }
    }
}

#[test]
fn lightly_flipped_copies_are_attributed() {
    let l = 1000;
    let model = CorrelationModel::synthetic(&SyntheticModel::new(l, 8)).unwrap();
    let params = FingerprintParams::new(0.1, 0.5, 0.05).unwrap();
    // probabilistic detection is left out: a single flipped point that lands
    // on an innocent's unique value makes that recipient certain
    let mut hits = [0usize; 2];
    for t in 0..20u64 {
        let x = model.sample_sequence(t);
        let ledger = share_all(
            &x,
            &params,
            &model,
            BsConfig::auto(10, 100.0).unwrap(),
            30,
            t,
        )
        .unwrap();
        let owner = 1 + (t as usize * 7) % 30;
        let leaked =
            flipping_attack(&ledger.reconstruct_copy(owner).unwrap(), 0.1, t + 50).unwrap();
        for (k, method) in [Method::Similarity, Method::Combined]
            .into_iter()
            .enumerate()
        {
            if detect(&ledger, &leaked, method).unwrap().accused == owner {
                hits[k] += 1;
            }
        }
    }
    assert_eq!(hits, [20, 20]);
}

#[test]
fn mismatched_leaks_are_rejected() {
    let x = Sequence::new(vec![0, 1, 2, 1], Alphabet::new(3).unwrap()).unwrap();
    let ledger = naive_ledger(&x, 2, 0.5, 1);
    let short = Sequence::new(vec![0, 1, 2], Alphabet::new(3).unwrap()).unwrap();
    assert!(detect(&ledger, &short, Method::Similarity).is_err());
    let other = Sequence::new(vec![0, 1, 2, 1], Alphabet::new(4).unwrap()).unwrap();
    assert!(detect(&ledger, &other, Method::Probabilistic).is_err());
    let empty =
        SharingLedger::new(x.clone(), FingerprintParams::new(0.1, 0.5, 0.0).unwrap()).unwrap();
    assert!(detect(&empty, &x, Method::Combined).is_err());
}
