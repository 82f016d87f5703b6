//! Adversaries run against shared copies.
//!
//! Single-recipient attacks work on one copy: random flipping, removal of
//! points (marked [`REMOVED`]) and correlation repair, which replaces any
//! point that forms an implausible pair with its predecessor. Collusion
//! attacks merge several copies by majority vote, either plainly or by
//! sampling from fingerprint-likelihood and correlation weights.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::correlation::{sample_index, CorrelationModel};
use crate::model::{Sequence, SharingLedger, State, REMOVED};
use crate::{seed, Error, Result};

/// Attack parameters. `coalition` holds 1-based recipient indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default)]
    pub p_f: f64,
    #[serde(default)]
    pub p_s: f64,
    #[serde(default)]
    pub tau_c: f64,
    #[serde(default = "AttackConfig::default_p_e")]
    pub p_e: f64,
    #[serde(default = "AttackConfig::default_coalition")]
    pub coalition: Vec<usize>,
    #[serde(default)]
    pub spread: Spread,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            p_f: 0.0,
            p_s: 0.0,
            tau_c: 0.0,
            p_e: Self::default_p_e(),
            coalition: Self::default_coalition(),
            spread: Spread::Split,
        }
    }
}

impl AttackConfig {
    fn default_p_e() -> f64 {
        0.1
    }

    fn default_coalition() -> Vec<usize> {
        vec![1]
    }

    /// Check ranges and, when a ledger is given, that every coalition member
    /// has a record.
    pub fn validate(&self, ledger: Option<&SharingLedger>) -> Result<()> {
        for (name, v) in [
            ("p_f", self.p_f),
            ("p_s", self.p_s),
            ("tau_c", self.tau_c),
            ("p_e", self.p_e),
        ] {
            check_probability(name, v)?;
        }
        if self.coalition.is_empty() {
            return Err(Error::Argument("coalition is empty".into()));
        }
        let mut seen = self.coalition.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument(format!(
                "coalition {:?} repeats a recipient",
                self.coalition
            )));
        }
        if let Some(ledger) = ledger {
            for &i in &self.coalition {
                ledger.record(i)?;
            }
        }
        Ok(())
    }
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be in [0,1], got {v}")))
    }
}

/// Uniform draw over the `m - 1` states other than `x`.
fn other_state<R: Rng + ?Sized>(rng: &mut R, x: State, m: usize) -> State {
    let r = rng.random_range(0..m as State - 1);
    if r >= x {
        r + 1
    } else {
        r
    }
}

fn maybe_flip<R: Rng + ?Sized>(rng: &mut R, y: State, p_f: f64, m: usize) -> State {
    if y != REMOVED && rng.random::<f64>() < p_f {
        other_state(rng, y, m)
    } else {
        y
    }
}

/// Replace each point, with probability `p_f`, by one of the other states.
/// Removed points stay removed.
pub fn flipping_attack(copy: &Sequence, p_f: f64, seed: u64) -> Result<Sequence> {
    check_probability("p_f", p_f)?;
    let m = copy.alphabet().size();
    let mut rng = seed::rng(seed);
    let values = copy
        .values()
        .iter()
        .map(|&y| maybe_flip(&mut rng, y, p_f, m))
        .collect();
    Ok(Sequence::from_parts_unchecked(values, copy.alphabet()))
}

/// Remove each point independently with probability `p_s`.
pub fn subset_attack(copy: &Sequence, p_s: f64, seed: u64) -> Result<Sequence> {
    check_probability("p_s", p_s)?;
    let mut rng = seed::rng(seed);
    let values = copy
        .values()
        .iter()
        .map(|&y| {
            if rng.random::<f64>() < p_s {
                REMOVED
            } else {
                y
            }
        })
        .collect();
    Ok(Sequence::from_parts_unchecked(values, copy.alphabet()))
}

/// State maximising the row, lowest code on ties.
fn row_argmax(row: &[f64]) -> State {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best as State
}

/// Left-to-right repair on the evolving sequence: a point whose pair with the
/// (possibly already modified) predecessor has conditional below `tau_c` is
/// set to the row's most likely state; any other point is flipped with
/// probability `p_f`.
pub fn correlation_attack(
    copy: &Sequence,
    model: &CorrelationModel,
    tau_c: f64,
    p_f: f64,
    seed: u64,
) -> Result<Sequence> {
    check_probability("p_f", p_f)?;
    check_length(model, copy.len())?;
    let m = copy.alphabet().size();
    let mut rng = seed::rng(seed);
    let mut y = copy.values().to_vec();
    for j in 0..y.len() {
        if y[j] == REMOVED {
            continue;
        }
        let prev = if j > 0 { y[j - 1] } else { REMOVED };
        if prev != REMOVED && model.cond(j, prev, y[j]) < tau_c {
            y[j] = row_argmax(model.row(j, prev));
        } else {
            y[j] = maybe_flip(&mut rng, y[j], p_f, m);
        }
    }
    Ok(Sequence::from_parts_unchecked(y, copy.alphabet()))
}

fn check_length(model: &CorrelationModel, l: usize) -> Result<()> {
    if model.len() != l {
        return Err(Error::Dimension(format!(
            "model covers {} points, sequence has {l}",
            model.len()
        )));
    }
    Ok(())
}

fn check_copies(copies: &[Sequence]) -> Result<()> {
    if copies.len() < 2 {
        return Err(Error::Argument(format!(
            "collusion needs at least 2 copies, got {}",
            copies.len()
        )));
    }
    let (l, a) = (copies[0].len(), copies[0].alphabet());
    if copies.iter().any(|c| c.len() != l || c.alphabet() != a) {
        return Err(Error::Dimension(
            "colluding copies differ in length or alphabet".into(),
        ));
    }
    Ok(())
}

fn count_states(copies: &[Sequence], j: usize, counts: &mut [usize]) {
    counts.fill(0);
    for c in copies {
        let v = c[j];
        if v != REMOVED {
            counts[v as usize] += 1;
        }
    }
}

/// Most frequent observed state, ties broken uniformly at random.
fn majority_vote<R: Rng + ?Sized>(rng: &mut R, counts: &[usize]) -> State {
    let best = counts.iter().copied().max().unwrap_or(0);
    if best == 0 {
        return REMOVED;
    }
    let tied = counts.iter().filter(|&&c| c == best).count();
    let mut pick = if tied > 1 {
        rng.random_range(0..tied)
    } else {
        0
    };
    for (k, &c) in counts.iter().enumerate() {
        if c == best {
            if pick == 0 {
                return k as State;
            }
            pick -= 1;
        }
    }
    unreachable!("a maximal count exists")
}

/// Per-position majority vote over the colluders' copies.
pub fn standard_majority(copies: &[Sequence], seed: u64) -> Result<Sequence> {
    standard_majority_with_flip(copies, 0.0, seed)
}

/// [`standard_majority`] followed by flipping with probability `p_f`.
pub fn standard_majority_with_flip(copies: &[Sequence], p_f: f64, seed: u64) -> Result<Sequence> {
    check_copies(copies)?;
    check_probability("p_f", p_f)?;
    let a = copies[0].alphabet();
    let m = a.size();
    let mut rng = seed::rng(seed);
    let mut counts = vec![0; m];
    let values = (0..copies[0].len())
        .map(|j| {
            count_states(copies, j, &mut counts);
            let v = majority_vote(&mut rng, &counts);
            maybe_flip(&mut rng, v, p_f, m)
        })
        .collect();
    Ok(Sequence::from_parts_unchecked(values, a))
}

/// How a copy's disagreement with a candidate value is weighted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spread {
    /// Each disagreeing copy contributes `p_e / (m - 1)`.
    #[default]
    Split,
    /// Each disagreeing copy contributes `p_e`.
    Whole,
}

/// Normalised sampling weights of the probabilistic majority vote at one
/// position: state `k` observed `counts[k]` times among `n` copies has weight
/// `(1-p_e)^counts[k] * q^(n-counts[k]) * cond[k]` with `q = p_e/(m-1)`
/// ([`Spread::Split`]) or `q = p_e` ([`Spread::Whole`]). `cond = None`
/// stands for the first position, where every conditional is 1. Returns
/// `None` when every weight is zero.
pub fn majority_weights(
    counts: &[usize],
    n: usize,
    p_e: f64,
    spread: Spread,
    cond: Option<&[f64]>,
) -> Option<Vec<f64>> {
    let mut w = vec![0.0; counts.len()];
    fill_majority_weights(counts, n, p_e, spread, cond, &mut w).then_some(w)
}

fn fill_majority_weights(
    counts: &[usize],
    n: usize,
    p_e: f64,
    spread: Spread,
    cond: Option<&[f64]>,
    out: &mut [f64],
) -> bool {
    let m = counts.len();
    let keep = (1.0 - p_e).ln();
    let alter = match spread {
        Spread::Split => (p_e / (m - 1) as f64).ln(),
        Spread::Whole => p_e.ln(),
    };
    // Work in logs relative to the largest term so that long coalitions do
    // not underflow.
    let mut top = f64::NEG_INFINITY;
    for k in 0..m {
        let c = counts[k] as f64;
        let correlation = cond.map_or(1.0, |row| row[k]);
        out[k] = if correlation > 0.0 {
            let mut lw = correlation.ln();
            if counts[k] > 0 {
                lw += c * keep;
            }
            if n > counts[k] {
                lw += (n as f64 - c) * alter;
            }
            lw
        } else {
            f64::NEG_INFINITY
        };
        top = top.max(out[k]);
    }
    if top == f64::NEG_INFINITY {
        return false;
    }
    let mut total = 0.0;
    for v in out.iter_mut() {
        *v = (*v - top).exp();
        total += *v;
    }
    out.iter_mut().for_each(|v| *v /= total);
    true
}

/// Settings of the probabilistic majority vote.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbabilisticMajority {
    /// Colluders' estimate of the fingerprinting probability.
    pub p_e: f64,
    /// Flip probability applied after sampling.
    pub p_f: f64,
    /// Correlation repair threshold; 0 disables the repair step.
    pub tau_c: f64,
    pub spread: Spread,
}

/// Leaked copy plus the number of positions that fell back to a plain vote.
#[derive(Clone, Debug, PartialEq)]
pub struct CollusionOutput {
    pub leaked: Sequence,
    pub fallbacks: usize,
}

impl ProbabilisticMajority {
    /// Walk left to right; sample each point from [`majority_weights`] given
    /// the point already chosen before it; then, if the new pair's
    /// conditional is below `tau_c`, replace the point with the row's most
    /// likely state, otherwise flip it with probability `p_f`.
    pub fn run(
        &self,
        copies: &[Sequence],
        model: &CorrelationModel,
        seed: u64,
    ) -> Result<CollusionOutput> {
        check_copies(copies)?;
        check_length(model, copies[0].len())?;
        if !(self.p_e > 0.0 && self.p_e < 1.0) {
            return Err(Error::Argument(format!(
                "p_e must be in (0,1), got {}",
                self.p_e
            )));
        }
        check_probability("p_f", self.p_f)?;
        check_probability("tau_c", self.tau_c)?;
        let a = copies[0].alphabet();
        if model.num_states() != a.size() {
            return Err(Error::Dimension(format!(
                "model has {} states, copies {}",
                model.num_states(),
                a.size()
            )));
        }
        let (n, m, l) = (copies.len(), a.size(), copies[0].len());
        let mut rng = seed::rng(seed);
        let mut counts = vec![0; m];
        let mut weights = vec![0.0; m];
        let mut y: Vec<State> = Vec::with_capacity(l);
        let mut fallbacks = 0;
        for j in 0..l {
            count_states(copies, j, &mut counts);
            let prev = if j > 0 { y[j - 1] } else { REMOVED };
            let row = (prev != REMOVED).then(|| model.row(j, prev));
            let mut v =
                if fill_majority_weights(&counts, n, self.p_e, self.spread, row, &mut weights) {
                    sample_index(&weights, rng.random::<f64>()) as State
                } else {
                    fallbacks += 1;
                    majority_vote(&mut rng, &counts)
                };
            match row {
                Some(row) if v != REMOVED && row[v as usize] < self.tau_c => v = row_argmax(row),
                _ => v = maybe_flip(&mut rng, v, self.p_f, m),
            }
            y.push(v);
        }
        Ok(CollusionOutput {
            leaked: Sequence::from_parts_unchecked(y, a),
            fallbacks,
        })
    }
}

/// Probabilistic majority vote without correlation repair.
pub fn probabilistic_majority(
    copies: &[Sequence],
    model: &CorrelationModel,
    p_e: f64,
    p_f: f64,
    seed: u64,
) -> Result<Sequence> {
    Ok(ProbabilisticMajority {
        p_e,
        p_f,
        tau_c: 0.0,
        spread: Spread::Split,
    }
    .run(copies, model, seed)?
    .leaked)
}

/// The copies held by a coalition of 1-based recipient indices.
pub fn coalition_copies(ledger: &SharingLedger, coalition: &[usize]) -> Result<Vec<Sequence>> {
    coalition
        .iter()
        .map(|&i| ledger.reconstruct_copy(i))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    /// Leak the first coalition member's copy unchanged.
    None,
    Flip,
    Subset,
    Corr,
    Majority,
    Pmajority,
}

impl AttackKind {
    pub fn is_collusion(self) -> bool {
        matches!(self, AttackKind::Majority | AttackKind::Pmajority)
    }

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Flip => "flip",
            AttackKind::Subset => "subset",
            AttackKind::Corr => "corr",
            AttackKind::Majority => "majority",
            AttackKind::Pmajority => "pmajority",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => AttackKind::None,
            "flip" => AttackKind::Flip,
            "subset" => AttackKind::Subset,
            "corr" => AttackKind::Corr,
            "majority" => AttackKind::Majority,
            "pmajority" => AttackKind::Pmajority,
            _ => return Err(Error::Argument(format!("unknown attack kind {s:?}"))),
        })
    }
}

/// Run `kind` against the coalition's copies from `ledger`. Single-copy
/// attacks use the first coalition member. Standard majority applies
/// `p_f` flipping as well, so `p_f = 0` gives the plain vote.
pub fn run_attack(
    kind: AttackKind,
    ledger: &SharingLedger,
    config: &AttackConfig,
    model: &CorrelationModel,
    seed: u64,
) -> Result<CollusionOutput> {
    config.validate(Some(ledger))?;
    let single = |f: &dyn Fn(&Sequence) -> Result<Sequence>| -> Result<CollusionOutput> {
        let copy = ledger.reconstruct_copy(config.coalition[0])?;
        Ok(CollusionOutput {
            leaked: f(&copy)?,
            fallbacks: 0,
        })
    };
    match kind {
        AttackKind::None => single(&|c| Ok(c.clone())),
        AttackKind::Flip => single(&|c| flipping_attack(c, config.p_f, seed)),
        AttackKind::Subset => single(&|c| subset_attack(c, config.p_s, seed)),
        AttackKind::Corr => {
            single(&|c| correlation_attack(c, model, config.tau_c, config.p_f, seed))
        }
        AttackKind::Majority => {
            let copies = coalition_copies(ledger, &config.coalition)?;
            Ok(CollusionOutput {
                leaked: standard_majority_with_flip(&copies, config.p_f, seed)?,
                fallbacks: 0,
            })
        }
        AttackKind::Pmajority => {
            let copies = coalition_copies(ledger, &config.coalition)?;
            ProbabilisticMajority {
                p_e: config.p_e,
                p_f: config.p_f,
                tau_c: config.tau_c,
                spread: config.spread,
            }
            .run(&copies, model, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Alphabet;

    fn seq(v: &[State]) -> Sequence {
        Sequence::new(v.to_vec(), Alphabet::new(3).unwrap()).unwrap()
    }

    #[test]
    fn flipping_extremes() {
        let x = seq(&[0, 1, 2, 0, 1, 2]);
        assert_eq!(flipping_attack(&x, 0.0, 1).unwrap(), x);
        let y = flipping_attack(&x, 1.0, 1).unwrap();
        assert!(x.values().iter().zip(y.values()).all(|(a, b)| a != b));
        assert!(flipping_attack(&x, 1.5, 1).is_err());
    }

    #[test]
    fn subset_extremes() {
        let x = seq(&[0, 1, 2, 0]);
        assert_eq!(subset_attack(&x, 0.0, 3).unwrap(), x);
        assert!(subset_attack(&x, 1.0, 3)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == REMOVED));
    }

    #[test]
    fn flipping_keeps_removed_points() {
        let x = Sequence::leaked(vec![0, REMOVED, 2], Alphabet::new(3).unwrap()).unwrap();
        assert_eq!(flipping_attack(&x, 1.0, 0).unwrap()[1], REMOVED);
    }

    #[test]
    fn correlation_attack_repairs_to_row_argmax() {
        let row_from_0 = vec![0.5, 0.03, 0.47];
        let model = CorrelationModel::stationary(
            3,
            vec![1.0 / 3.0; 3],
            vec![row_from_0, vec![0.2, 0.2, 0.6], vec![0.1, 0.3, 0.6]],
        )
        .unwrap();
        let x = seq(&[0, 1, 2]);
        let y = correlation_attack(&x, &model, 0.1, 0.0, 0).unwrap();
        // (0 -> 1) has conditional 0.03, repaired to 0; (0 -> 2) then passes
        assert_eq!(y.values(), &[0, 0, 2]);
        assert_eq!(correlation_attack(&x, &model, 0.0, 0.0, 0).unwrap(), x);
    }

    #[test]
    fn argmax_ties_go_to_lowest_state() {
        assert_eq!(row_argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(row_argmax(&[0.5, 0.5, 0.0]), 0);
    }

    #[test]
    fn majority_of_identical_copies() {
        let x = seq(&[0, 1, 2, 2]);
        assert_eq!(
            standard_majority(&[x.clone(), x.clone(), x.clone()], 5).unwrap(),
            x
        );
        assert!(standard_majority(&[x.clone()], 5).is_err());
        let y = seq(&[0, 0, 1, 2]);
        let z = seq(&[1, 0, 1, 2]);
        assert_eq!(
            standard_majority(&[x, y, z], 5).unwrap().values(),
            &[0, 0, 1, 2]
        );
    }

    #[test]
    fn four_colluders_toy_weights() {
        // worked example: three copies hold 0, one holds 1, p_e = 0.1
        let p = majority_weights(&[3, 1, 0], 4, 0.1, Spread::Whole, None).unwrap();
        assert!((p[0] - 0.0729 / 0.0739).abs() < 1e-12);
        assert!((p[0] - 0.987).abs() < 1e-3);
        assert!((p[1] - 0.012).abs() < 5e-4);
        assert!((p[2] - 0.001).abs() < 5e-4);

        let p = majority_weights(&[3, 1, 0], 4, 0.1, Spread::Split, None).unwrap();
        let t = [
            0.9f64.powi(3) * 0.05,
            0.9 * 0.05f64.powi(3),
            0.05f64.powi(4),
        ];
        let total: f64 = t.iter().sum();
        for k in 0..3 {
            assert!((p[k] - t[k] / total).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_correlation_everywhere_has_no_weights() {
        assert!(
            majority_weights(&[2, 0, 0], 2, 0.1, Spread::Split, Some(&[0.0, 0.0, 0.0])).is_none()
        );
        assert!(
            majority_weights(&[2, 0, 0], 2, 0.1, Spread::Split, Some(&[0.0, 0.5, 0.5])).is_some()
        );
    }

    #[test]
    fn unanimous_copies_survive_tiny_p_e() {
        let x = seq(&[0, 1, 2, 1, 0]);
        let model = CorrelationModel::uniform(5, 3).unwrap();
        let y = probabilistic_majority(&[x.clone(), x.clone(), x.clone()], &model, 1e-12, 0.0, 9)
            .unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn attacks_are_deterministic() {
        let x = seq(&[0, 1, 2, 1, 0, 2, 2, 1]);
        let z = seq(&[1, 1, 2, 0, 0, 2, 1, 1]);
        let model = CorrelationModel::uniform(8, 3).unwrap();
        assert_eq!(
            flipping_attack(&x, 0.4, 3).unwrap(),
            flipping_attack(&x, 0.4, 3).unwrap()
        );
        assert_eq!(
            probabilistic_majority(&[x.clone(), z.clone()], &model, 0.2, 0.1, 4).unwrap(),
            probabilistic_majority(&[x, z], &model, 0.2, 0.1, 4).unwrap()
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = AttackConfig {
            coalition: vec![1, 2, 1],
            ..AttackConfig::default()
        };
        assert!(cfg.validate(None).is_err());
        cfg.coalition = vec![1, 2];
        assert!(cfg.validate(None).is_ok());
        cfg.p_f = -0.1;
        assert!(cfg.validate(None).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [
            AttackKind::None,
            AttackKind::Flip,
            AttackKind::Subset,
            AttackKind::Corr,
            AttackKind::Majority,
            AttackKind::Pmajority,
        ] {
            assert_eq!(k.name().parse::<AttackKind>().unwrap(), k);
        }
    }
}
