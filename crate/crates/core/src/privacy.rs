//! Trading attribution for privacy.
//!
//! The hybrid mode replicates a fraction `lambda` of the first recipient's
//! fingerprints in every copy: at `lambda = 0` copies are as distinct as the
//! plain scheme makes them, at `lambda = 1` every recipient holds the same
//! noisy copy. Randomized response is the fully private baseline: one noisy
//! copy, shared with everybody.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::boneh_shaw::{build_layout, recipient_seed, BsConfig, CodeLayout};
use crate::correlation::CorrelationModel;
use crate::fingerprint::{fingerprint_alg1, fingerprint_alg2_at_rate, Preassignment};
use crate::model::{
    diff_fingerprints, Fingerprint, FingerprintParams, FingerprintRecord, Sequence, SharingLedger,
};
use crate::seed::{self, stream};
use crate::{Error, Result};

/// Boneh-Shaw settings of a hybrid share; `r = None` sizes the blocks from
/// the fingerprint budget left after the overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsChoice {
    pub c: usize,
    #[serde(default)]
    pub r: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HybridConfig {
    pub lambda: f64,
    pub base: FingerprintParams,
    pub bs: Option<BsChoice>,
}

impl HybridConfig {
    pub fn new(lambda: f64, base: FingerprintParams, bs: Option<BsChoice>) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Argument(format!(
                "lambda must be in [0,1], got {lambda}"
            )));
        }
        Ok(HybridConfig { lambda, base, bs })
    }
}

/// Share with `num_sps` recipients. The first copy comes from the plain
/// generator; `floor(lambda * f)` of its `f` fingerprints form the overlap,
/// fixed in every later copy. With Boneh-Shaw enabled and `lambda < 1`, the
/// code layout is cut from the remaining fingerprints. Every later copy is
/// generated around the overlap and its codeword bits, with the free points
/// starting at rate `((1 - lambda) p l + |O| - f_i) / (l - f1)`, clamped to
/// `[0, 1]`, where `f_i` and `f1` count its fixed fingerprints and fixed
/// points.
pub fn hybrid_share(
    original: &Sequence,
    config: &HybridConfig,
    model: &CorrelationModel,
    num_sps: usize,
    master_seed: u64,
) -> Result<SharingLedger> {
    if num_sps == 0 {
        return Err(Error::Argument("need at least one recipient".into()));
    }
    let params = &config.base;
    let l = original.len();
    let seed1 = recipient_seed(master_seed, 1);
    let first = fingerprint_alg1(original, params, model, seed1)?;
    let fp1 = &first.fingerprint;
    let f = fp1.len();

    let overlap_count = (config.lambda * f as f64).floor() as usize;
    let mut rng = seed::rng(seed::derive(master_seed, &[stream::OVERLAP]));
    let mut in_overlap = vec![false; f];
    for k in index::sample(&mut rng, f, overlap_count) {
        in_overlap[k] = true;
    }
    let overlap: Vec<(usize, i32)> = fp1
        .iter()
        .zip(&in_overlap)
        .filter(|(_, &o)| o)
        .map(|(p, _)| p)
        .collect();
    let rest = Fingerprint {
        positions: fp1
            .iter()
            .zip(&in_overlap)
            .filter(|(_, &o)| !o)
            .map(|((j, _), _)| j)
            .collect(),
        values: fp1
            .iter()
            .zip(&in_overlap)
            .filter(|(_, &o)| !o)
            .map(|((_, v), _)| v)
            .collect(),
    };

    let unique_budget = (1.0 - config.lambda) * params.p() * l as f64;
    let layout = match config.bs {
        Some(bs) if config.lambda < 1.0 => {
            let r = match bs.r {
                Some(r) => Some(r),
                None => {
                    let r = (unique_budget / 2.0 / (bs.c.max(2) - 1) as f64).floor() as usize;
                    if r == 0 {
                        debug!(
                            lambda = config.lambda,
                            "no room for Boneh-Shaw blocks; sharing without a code"
                        );
                    }
                    (r > 0).then_some(r)
                }
            };
            match r {
                Some(r) => {
                    let bs_config = BsConfig::new(bs.c, r)?;
                    if overlap_count + bs_config.f1() > f {
                        return Err(Error::Config(format!(
                            "overlap of {overlap_count} plus {} code bits exceeds the first copy's {f} fingerprints",
                            bs_config.f1()
                        )));
                    }
                    Some(build_layout(
                        &rest,
                        bs_config,
                        seed::derive(master_seed, &[stream::LAYOUT]),
                    )?)
                }
                None => None,
            }
        }
        _ => None,
    };

    let preassignment = |w: Option<usize>| -> Result<Preassignment> {
        let mut pre = Preassignment::new(original, overlap.iter().copied())?;
        if let (Some(layout), Some(w)) = (&layout, w) {
            for (j, v) in layout.fixed_points(original, w) {
                pre.insert(original, j, v)?;
            }
        }
        Ok(pre)
    };
    let codeword = |i: usize| {
        layout
            .as_ref()
            .map(|lay: &CodeLayout| lay.config().codeword_for(i))
    };

    let later: Vec<FingerprintRecord> = (2..=num_sps)
        .into_par_iter()
        .map(|i| {
            let w = codeword(i);
            let pre = preassignment(w)?;
            let free = l - pre.f1();
            let base = if free == 0 {
                0.0
            } else {
                (unique_budget + overlap_count as f64 - pre.fingerprinted() as f64) / free as f64
            };
            let s = recipient_seed(master_seed, i);
            let g =
                fingerprint_alg2_at_rate(original, &pre, base.clamp(0.0, 1.0), params, model, s)?;
            Ok(g.into_record(i, s, w).1)
        })
        .collect::<Result<_>>()?;

    let mut ledger = SharingLedger::new(original.clone(), *params)?;
    ledger.push(first.into_record(1, seed1, codeword(1)).1)?;
    for record in later {
        ledger.push(record)?;
    }
    if let Some(layout) = layout {
        ledger.set_code_layout(layout)?;
    }
    Ok(ledger)
}

/// Probability of reporting the true state under `epsilon`-randomized
/// response over `m` states, `e^eps / (e^eps + m - 1)`.
pub fn keep_probability(epsilon: f64, m: usize) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::Argument(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    // 1 / (1 + (m-1) e^-eps) stays finite as epsilon grows
    Ok(1.0 / (1.0 + (m - 1) as f64 * (-epsilon).exp()))
}

/// Inverse of [`keep_probability`] for three states: `ln(2q / (1 - q))`.
pub fn epsilon_from_keep_prob(q: f64) -> Result<f64> {
    epsilon_from_keep_prob_m(q, 3)
}

/// `ln((m-1) q / (1 - q))` for `1/m < q < 1`.
pub fn epsilon_from_keep_prob_m(q: f64, m: usize) -> Result<f64> {
    if m < 2 || !(q > 1.0 / m as f64 && q < 1.0) {
        return Err(Error::Argument(format!(
            "keep probability must lie in (1/{m}, 1), got {q}"
        )));
    }
    Ok(((m - 1) as f64 * q / (1.0 - q)).ln())
}

/// Three-state randomized response: keep each point with probability
/// `e^eps / (e^eps + 2)`, otherwise report one of the other two states.
pub fn randomized_response(original: &Sequence, epsilon: f64, seed: u64) -> Result<Sequence> {
    if original.alphabet().size() != 3 {
        return Err(Error::Argument(format!(
            "three-state randomized response applied to {} states; use randomized_response_m",
            original.alphabet().size()
        )));
    }
    randomized_response_m(original, epsilon, seed)
}

/// Randomized response over any alphabet size.
pub fn randomized_response_m(original: &Sequence, epsilon: f64, seed: u64) -> Result<Sequence> {
    let m = original.alphabet().size();
    let keep = keep_probability(epsilon, m)?;
    let mut rng = seed::rng(seed);
    let values = original
        .values()
        .iter()
        .map(|&x| {
            if rng.random::<f64>() < keep {
                x
            } else {
                let r = rng.random_range(0..m as i32 - 1);
                if r >= x {
                    r + 1
                } else {
                    r
                }
            }
        })
        .collect();
    Ok(Sequence::from_parts_unchecked(values, original.alphabet()))
}

/// Share one randomized-response copy with all `num_sps` recipients. Every
/// ledger record holds the same differences; `params` is stored for
/// reference only.
pub fn rr_share(
    original: &Sequence,
    epsilon: f64,
    params: FingerprintParams,
    num_sps: usize,
    seed: u64,
) -> Result<SharingLedger> {
    if num_sps == 0 {
        return Err(Error::Argument("need at least one recipient".into()));
    }
    let noisy = randomized_response_m(original, epsilon, seed)?;
    let fingerprint = diff_fingerprints(original, &noisy)?;
    let mut ledger = SharingLedger::new(original.clone(), params)?;
    for i in 1..=num_sps {
        ledger.push(FingerprintRecord {
            sp_index: i,
            seed,
            fingerprint: fingerprint.clone(),
            codeword_index: None,
        })?;
    }
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boneh_shaw::share_all;
    use crate::correlation::SyntheticModel;

    fn setup(l: usize) -> (Sequence, CorrelationModel, FingerprintParams) {
        let model = CorrelationModel::synthetic(&SyntheticModel::new(l, 7)).unwrap();
        let x = model.sample_sequence(3);
        (x, model, FingerprintParams::new(0.1, 0.5, 0.05).unwrap())
    }

    #[test]
    fn lambda_zero_matches_plain_boneh_shaw_sharing() {
        let (x, model, params) = setup(1000);
        let cfg = HybridConfig::new(0.0, params, Some(BsChoice { c: 10, r: None })).unwrap();
        let hybrid = hybrid_share(&x, &cfg, &model, 12, 99).unwrap();
        let plain = share_all(
            &x,
            &params,
            &model,
            BsConfig::auto(10, 100.0).unwrap(),
            12,
            99,
        )
        .unwrap();
        assert_eq!(hybrid, plain);
    }

    #[test]
    fn lambda_one_gives_identical_copies() {
        let (x, model, params) = setup(500);
        let cfg = HybridConfig::new(1.0, params, Some(BsChoice { c: 10, r: None })).unwrap();
        let ledger = hybrid_share(&x, &cfg, &model, 6, 5).unwrap();
        assert!(ledger.code_layout().is_none());
        let first = ledger.reconstruct_copy(1).unwrap();
        for i in 2..=6 {
            assert_eq!(ledger.reconstruct_copy(i).unwrap(), first);
        }
    }

    #[test]
    fn half_overlap_is_shared_by_every_pair() {
        let (x, model, params) = setup(1000);
        let cfg = HybridConfig::new(0.5, params, None).unwrap();
        let ledger = hybrid_share(&x, &cfg, &model, 5, 11).unwrap();
        let f = ledger.record(1).unwrap().count();
        let copies: Vec<_> = (1..=5).map(|i| ledger.record(i).unwrap()).collect();
        for a in 0..5 {
            for b in a + 1..5 {
                let shared = copies[a]
                    .fingerprint
                    .iter()
                    .filter(|p| copies[b].fingerprint.iter().any(|q| q == *p))
                    .count();
                assert!(
                    shared >= f / 2,
                    "pair ({}, {}) shares {shared} of {f}",
                    a + 1,
                    b + 1
                );
            }
        }
    }

    #[test]
    fn fixed_code_too_large_for_overlap() {
        let (x, model, params) = setup(300);
        let cfg = HybridConfig::new(0.9, params, Some(BsChoice { c: 10, r: Some(2) })).unwrap();
        assert!(matches!(
            hybrid_share(&x, &cfg, &model, 3, 1),
            Err(Error::Config(_))
        ));
        assert!(HybridConfig::new(1.5, params, None).is_err());
    }

    #[test]
    fn keep_probability_and_inverse() {
        let eps = epsilon_from_keep_prob(0.9).unwrap();
        assert!((eps - 2.890).abs() < 5e-4);
        assert!((keep_probability(eps, 3).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(keep_probability(f64::INFINITY, 3).unwrap(), 1.0);
        assert!(keep_probability(-1.0, 3).is_err());
        assert!(epsilon_from_keep_prob(1.0 / 3.0).is_err());
        assert!(epsilon_from_keep_prob(1.0).is_err());
        assert!(epsilon_from_keep_prob(1.0 / 3.0 + 1e-9).unwrap() < 1e-7);
    }

    #[test]
    fn infinite_epsilon_is_identity() {
        let (x, _, _) = setup(200);
        assert_eq!(randomized_response(&x, f64::INFINITY, 4).unwrap(), x);
    }

    #[test]
    fn rr_ledger_holds_one_copy() {
        let (x, _, params) = setup(200);
        let ledger = rr_share(&x, 2.89, params, 4, 8).unwrap();
        let first = ledger.reconstruct_copy(1).unwrap();
        for i in 2..=4 {
            assert_eq!(ledger.reconstruct_copy(i).unwrap(), first);
        }
    }
}
