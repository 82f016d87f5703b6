//! Fingerprint generation.
//!
//! Three generators share one sampling loop:
//!
//! * [`fingerprint_naive`] alters every point independently with probability
//!   `p`, ignoring correlations.
//! * [`fingerprint_alg1`] walks the sequence left to right and, at each point,
//!   assigns a probability to every state with [`assign_probabilities`]:
//!   states that would form an implausible pair with the previously shared
//!   value (conditional below `tau`) are excluded, the true state keeps
//!   `1 - rate`, and the remaining mass goes to the other states in
//!   proportion to their conditionals. Every `ceil(1/p)` points the rate is
//!   nudged by `theta` to keep the total near `p * l`.
//! * [`fingerprint_alg2`] does the same around a set of pre-assigned points
//!   (Boneh-Shaw code bits, overlap points), which are copied verbatim and
//!   also constrain the point just before them.

use std::collections::BTreeMap;

use rand::Rng;
use tracing::debug;

use crate::correlation::{sample_index, CorrelationModel};
use crate::model::{Fingerprint, FingerprintParams, FingerprintRecord, Sequence, State};
use crate::{seed, Error, Result};

const RATE_TIE_TOL: f64 = 1e-9;

/// Sharing distribution over the `m` states at one position.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityAssignment {
    pub probs: Vec<f64>,
    /// Every state was excluded; the raw conditional row was used instead.
    pub degenerate: bool,
}

/// What the generator knows about one position when assigning probabilities.
#[derive(Clone, Copy, Debug)]
pub struct PositionContext {
    /// 0-based position.
    pub j: usize,
    pub original: State,
    /// Value already shared at `j - 1`; ignored at `j = 0`.
    pub prev_shared: State,
    /// Forced value at `j + 1`, if that position is pre-assigned.
    pub next_fixed: Option<State>,
}

/// Apply the per-position branch ladder and return the sharing distribution.
pub fn assign_probabilities(
    model: &CorrelationModel,
    ctx: PositionContext,
    prob: f64,
    tau: f64,
) -> ProbabilityAssignment {
    let mut probs = vec![0.0; model.num_states()];
    let degenerate = fill_probabilities(model, ctx, prob, tau, &mut probs);
    ProbabilityAssignment { probs, degenerate }
}

/// Writes the distribution into `out`; returns `true` on the degenerate
/// fallback.
fn fill_probabilities(
    model: &CorrelationModel,
    ctx: PositionContext,
    prob: f64,
    tau: f64,
    out: &mut [f64],
) -> bool {
    let m = out.len();
    let truth = ctx.original as usize;
    let prob = prob.clamp(0.0, 1.0);

    if ctx.j == 0 {
        let other = prob / (m - 1) as f64;
        out.fill(other);
        out[truth] = 1.0 - prob;
        return false;
    }

    let row = model.row(ctx.j, ctx.prev_shared);
    let next = ctx.next_fixed.filter(|_| ctx.j + 1 < model.len());
    let mut assigned_mass = 0.0;
    let mut free_weight = 0.0;
    let mut truth_kept = false;
    // -1 marks a state still waiting for its share of the remaining mass
    const FREE: f64 = -1.0;
    for k in 0..m {
        let c = row[k];
        if c < tau || next.is_some_and(|nf| model.cond(ctx.j + 1, k as State, nf) < tau) {
            out[k] = 0.0;
        } else if k == truth {
            out[k] = 1.0 - prob;
            assigned_mass += 1.0 - prob;
            truth_kept = true;
        } else {
            out[k] = FREE;
            free_weight += c;
        }
    }

    if free_weight > 0.0 {
        let scale = (1.0 - assigned_mass) / free_weight;
        for k in 0..m {
            if out[k] == FREE {
                out[k] = row[k] * scale;
            }
        }
        false
    } else if truth_kept {
        for k in 0..m {
            out[k] = if k == truth { 1.0 } else { 0.0 };
        }
        false
    } else {
        out.copy_from_slice(row);
        true
    }
}

/// New fingerprinting rate at a block boundary after `j` points with `count`
/// fingerprints so far.
pub fn adjust_rate(count: usize, j: usize, p: f64, theta: f64) -> f64 {
    p * adjust_factor(count, j, p, theta)
}

fn adjust_factor(count: usize, j: usize, p: f64, theta: f64) -> f64 {
    let target = p * j as f64;
    let c = count as f64;
    if c > target + RATE_TIE_TOL {
        1.0 - theta
    } else if c < target - RATE_TIE_TOL {
        1.0 + theta
    } else {
        1.0
    }
}

/// A generated copy together with its fingerprint.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub copy: Sequence,
    pub fingerprint: Fingerprint,
    /// Positions where every state was excluded and the raw row was used.
    pub degenerate: usize,
}

impl Generated {
    pub fn into_record(
        self,
        sp_index: usize,
        seed: u64,
        codeword_index: Option<usize>,
    ) -> (Sequence, FingerprintRecord) {
        let record = FingerprintRecord {
            sp_index,
            seed,
            fingerprint: self.fingerprint,
            codeword_index,
        };
        (self.copy, record)
    }

    pub fn count(&self) -> usize {
        self.fingerprint.len()
    }
}

fn finish(original: &Sequence, values: Vec<State>, degenerate: usize) -> Generated {
    let mut fingerprint = Fingerprint::default();
    for (j, (&x, &y)) in original.values().iter().zip(&values).enumerate() {
        if x != y {
            fingerprint.positions.push(j);
            fingerprint.values.push(y);
        }
    }
    if degenerate > 0 {
        debug!(degenerate, "fell back to the raw conditional row");
    }
    Generated {
        copy: Sequence::from_parts_unchecked(values, original.alphabet()),
        fingerprint,
        degenerate,
    }
}

/// Alter each point independently with probability `p`, to a uniformly chosen
/// other state.
pub fn fingerprint_naive(original: &Sequence, p: f64, seed: u64) -> Result<Generated> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!(
            "fingerprinting probability must be in [0,1], got {p}"
        )));
    }
    let m = original.alphabet().size() as State;
    let mut rng = seed::rng(seed);
    let values = original
        .values()
        .iter()
        .map(|&x| {
            if rng.random::<f64>() < p {
                let r = rng.random_range(0..m - 1);
                if r >= x {
                    r + 1
                } else {
                    r
                }
            } else {
                x
            }
        })
        .collect();
    Ok(finish(original, values, 0))
}

/// Correlation-aware generator without pre-assigned points.
pub fn fingerprint_alg1(
    original: &Sequence,
    params: &FingerprintParams,
    model: &CorrelationModel,
    seed: u64,
) -> Result<Generated> {
    model.check_sequence(original)?;
    let fixed = vec![None; original.len()];
    Ok(generate(original, &fixed, params.p(), params, model, seed))
}

/// Points fixed before the correlation-aware pass runs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Preassignment {
    fixed: BTreeMap<usize, State>,
    fingerprinted: usize,
}

impl Preassignment {
    /// Fix `values` at 0-based positions of `original`.
    pub fn new(
        original: &Sequence,
        fixed: impl IntoIterator<Item = (usize, State)>,
    ) -> Result<Self> {
        let mut pre = Preassignment::default();
        for (j, v) in fixed {
            pre.insert(original, j, v)?;
        }
        Ok(pre)
    }

    pub fn insert(&mut self, original: &Sequence, j: usize, v: State) -> Result<()> {
        if j >= original.len() {
            return Err(Error::Argument(format!(
                "pre-assigned position {} outside 1..={}",
                j + 1,
                original.len()
            )));
        }
        if !original.alphabet().contains(v) {
            return Err(Error::Argument(format!(
                "pre-assigned value {v} outside the alphabet"
            )));
        }
        match self.fixed.get(&j) {
            Some(&old) if old != v => {
                return Err(Error::Argument(format!(
                    "position {} pre-assigned twice with different values",
                    j + 1
                )))
            }
            Some(_) => return Ok(()),
            None => {
                self.fixed.insert(j, v);
            }
        }
        if v != original[j] {
            self.fingerprinted += 1;
        }
        Ok(())
    }

    /// Total pre-assigned positions (`f1`).
    pub fn f1(&self) -> usize {
        self.fixed.len()
    }

    /// Pre-assigned positions that differ from the original (`f_i`).
    pub fn fingerprinted(&self) -> usize {
        self.fingerprinted
    }

    pub fn get(&self, j: usize) -> Option<State> {
        self.fixed.get(&j).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, State)> + '_ {
        self.fixed.iter().map(|(&j, &v)| (j, v))
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    /// Starting rate for the free positions: `(p*l - f_i) / (l - f1)`.
    pub fn base_rate(&self, p: f64, l: usize) -> f64 {
        let free = l - self.f1();
        if free == 0 {
            return 0.0;
        }
        (p * l as f64 - self.fingerprinted as f64) / free as f64
    }
}

/// Correlation-aware generator around pre-assigned points. The free
/// positions start at rate `(p*l - f_i) / (l - f1)`, which must lie in `[0,1)`.
pub fn fingerprint_alg2(
    original: &Sequence,
    pre: &Preassignment,
    params: &FingerprintParams,
    model: &CorrelationModel,
    seed: u64,
) -> Result<Generated> {
    let base = pre.base_rate(params.p(), original.len());
    if !(0.0..1.0).contains(&base) {
        return Err(Error::Argument(format!(
            "starting rate {base} outside [0,1): p = {}, l = {}, f1 = {}, f_i = {}",
            params.p(),
            original.len(),
            pre.f1(),
            pre.fingerprinted()
        )));
    }
    fingerprint_alg2_at_rate(original, pre, base, params, model, seed)
}

/// As [`fingerprint_alg2`] with an explicit starting rate.
pub fn fingerprint_alg2_at_rate(
    original: &Sequence,
    pre: &Preassignment,
    base_rate: f64,
    params: &FingerprintParams,
    model: &CorrelationModel,
    seed: u64,
) -> Result<Generated> {
    model.check_sequence(original)?;
    if !(0.0..=1.0).contains(&base_rate) {
        return Err(Error::Argument(format!(
            "starting rate {base_rate} outside [0,1]"
        )));
    }
    let mut fixed = vec![None; original.len()];
    for (j, v) in pre.iter() {
        if j >= original.len() {
            return Err(Error::Dimension(format!(
                "pre-assigned position {} beyond the sequence",
                j + 1
            )));
        }
        fixed[j] = Some(v);
    }
    Ok(generate(original, &fixed, base_rate, params, model, seed))
}

/// Shared sampling loop. Block boundaries compare the running count against
/// `p * j`; the new rate scales `base_rate` by `1 - theta`, `1 + theta` or 1.
fn generate(
    original: &Sequence,
    fixed: &[Option<State>],
    base_rate: f64,
    params: &FingerprintParams,
    model: &CorrelationModel,
    seed: u64,
) -> Generated {
    let l = original.len();
    let x = original.values();
    let block = params.block_size();
    let mut rng = seed::rng(seed);
    let mut probs = vec![0.0; model.num_states()];
    let mut values: Vec<State> = Vec::with_capacity(l);
    let mut prob = base_rate;
    let mut count = 0usize;
    let mut degenerate = 0usize;

    for j in 0..l {
        let v = match fixed[j] {
            Some(v) => v,
            None => {
                let ctx = PositionContext {
                    j,
                    original: x[j],
                    prev_shared: if j > 0 { values[j - 1] } else { 0 },
                    next_fixed: fixed.get(j + 1).copied().flatten(),
                };
                if fill_probabilities(model, ctx, prob, params.tau(), &mut probs) {
                    degenerate += 1;
                }
                sample_index(&probs, rng.random::<f64>()) as State
            }
        };
        if v != x[j] {
            count += 1;
        }
        values.push(v);
        if (j + 1) % block == 0 {
            prob = (base_rate * adjust_factor(count, j + 1, params.p(), params.theta())).min(1.0);
        }
    }
    finish(original, values, degenerate)
}
