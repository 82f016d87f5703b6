//! Attributing a leaked copy to a recipient.
//!
//! * Similarity: the share of a recipient's fingerprinted points that the
//!   leak reproduces.
//! * Probabilistic: every recipient holding the leaked value at a point is
//!   suspected with probability `1/|V_j|`, where `V_j` is the set of such
//!   recipients; guilt is one minus the product of the complements.
//! * Combined: similarity alone when one recipient matches more than half of
//!   its fingerprints, otherwise a short suspect list checked against the
//!   Boneh-Shaw blocks.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::boneh_shaw::{classify_block, BlockClass, CodeLayout};
use crate::model::{Sequence, SharingLedger, REMOVED};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Similarity,
    Probabilistic,
    Combined,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Similarity => "sim",
            Method::Probabilistic => "prob",
            Method::Combined => "combined",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim" | "similarity" => Ok(Method::Similarity),
            "prob" | "probabilistic" => Ok(Method::Probabilistic),
            "combined" => Ok(Method::Combined),
            _ => Err(Error::Argument(format!("unknown detection method {s:?}"))),
        }
    }
}

/// Scores that order the combined detector's suspect list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    #[default]
    Similarity,
    Probabilistic,
}

/// Why the combined detector accused the top-scoring recipient without a
/// block check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// No recipient matched any of its fingerprints; probabilistic argmax.
    ZeroSimilarity,
    /// The ledger carries no code layout; similarity argmax.
    NoLayout,
    /// No suspect passed its block check; argmax.
    NoSuspectPassed,
}

/// Block check for one suspect of the combined detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuspectEvidence {
    pub sp_index: usize,
    pub codeword: usize,
    /// Class of block `codeword - 1`, absent for codeword 1.
    pub previous_block: Option<BlockClass>,
    /// Class of block `codeword`, absent for the last codeword.
    pub block: Option<BlockClass>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// 1-based index of the accused recipient.
    pub accused: usize,
    /// One score per recipient, recipient 1 first. Probabilistic detection
    /// reports `-ln(1 - guilt)`, which keeps its order where the guilt
    /// probability itself rounds to 1; it is infinite when some point
    /// singles the recipient out.
    pub scores: Vec<f64>,
    /// 1-based recipient indices by descending score.
    pub suspects: Vec<usize>,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_evidence: Option<Vec<SuspectEvidence>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<Fallback>,
}

fn check_leak(ledger: &SharingLedger, leaked: &Sequence) -> Result<()> {
    let original = ledger.original();
    if leaked.len() != original.len() {
        return Err(Error::Dimension(format!(
            "leaked copy has {} points, the original {}",
            leaked.len(),
            original.len()
        )));
    }
    if leaked.alphabet() != original.alphabet() {
        return Err(Error::Dimension(
            "leaked copy uses a different alphabet".into(),
        ));
    }
    if ledger.num_recipients() == 0 {
        return Err(Error::Argument("ledger has no recipients".into()));
    }
    Ok(())
}

/// `sim_i = |M_i| / |F_i|`: the fraction of recipient `i`'s fingerprinted
/// points whose value the leak reproduces. Removed points never match; a
/// recipient without fingerprints scores 0.
pub fn similarity_scores(ledger: &SharingLedger, leaked: &Sequence) -> Result<Vec<f64>> {
    check_leak(ledger, leaked)?;
    let y = leaked.values();
    Ok(ledger
        .records()
        .iter()
        .map(|r| {
            if r.count() == 0 {
                debug!(
                    sp = r.sp_index,
                    "recipient has no fingerprints; similarity 0"
                );
                return 0.0;
            }
            let matched = r
                .positions()
                .iter()
                .zip(r.values())
                .filter(|&(&j, &v)| y[j] == v)
                .count();
            matched as f64 / r.count() as f64
        })
        .collect())
}

/// Sum of `ln(1 - 1/|V_j|)` split into a finite part and the number of
/// points with `|V_j| = 1`, whose term is `-inf`.
#[derive(Clone, Copy, Debug, Default)]
struct LogComplement {
    finite: f64,
    certain: usize,
}

impl LogComplement {
    /// `holders = 0` (every recipient altered a point the leak shows
    /// unaltered) concerns nobody and is skipped.
    fn add(&mut self, holders: usize, sign: f64) {
        if holders == 0 {
            return;
        }
        if holders == 1 {
            if sign > 0.0 {
                self.certain += 1;
            } else {
                self.certain -= 1;
            }
        } else {
            self.finite += sign * (1.0 - 1.0 / holders as f64).ln();
        }
    }

    /// `-ln(prod (1 - 1/|V_j|))`.
    fn evidence(self) -> f64 {
        if self.certain > 0 {
            f64::INFINITY
        } else {
            -self.finite
        }
    }
}

/// Per recipient, `-ln(1 - guilt)` where guilt is
/// `1 - prod_{j : y_j = x'_{i,j}} (1 - 1/|V_j|)`. Runs in
/// `O(l + sum_i |F_i|)` by starting every recipient from the points where
/// the leak equals the original and correcting at its fingerprinted points.
pub fn probabilistic_evidence(ledger: &SharingLedger, leaked: &Sequence) -> Result<Vec<f64>> {
    check_leak(ledger, leaked)?;
    let x = ledger.original().values();
    let y = leaked.values();
    let l = x.len();
    let n = ledger.num_recipients();

    // Recipients altering each point, and how many of them hold the leaked value there.
    let mut altered = vec![0usize; l];
    let mut hold_leaked = vec![0usize; l];
    for r in ledger.records() {
        for (&j, &v) in r.positions().iter().zip(r.values()) {
            altered[j] += 1;
            if y[j] == v {
                hold_leaked[j] += 1;
            }
        }
    }
    let holders = |j: usize| {
        if y[j] == x[j] {
            n - altered[j]
        } else {
            hold_leaked[j]
        }
    };

    // Contribution of every point where the leak shows the original value,
    // assuming the recipient holds the original there.
    let mut base = LogComplement::default();
    for j in 0..l {
        if y[j] != REMOVED && y[j] == x[j] {
            base.add(holders(j), 1.0);
        }
    }
    Ok(ledger
        .records()
        .iter()
        .map(|r| {
            let mut acc = base;
            for (&j, &v) in r.positions().iter().zip(r.values()) {
                if y[j] == REMOVED {
                    continue;
                }
                if y[j] == x[j] {
                    acc.add(holders(j), -1.0);
                } else if y[j] == v {
                    acc.add(holders(j), 1.0);
                }
            }
            acc.evidence()
        })
        .collect())
}

/// Guilt probability `1 - prod (1 - 1/|V_j|)` per recipient. Values round
/// to 1 quickly as the number of agreeing points grows; rank with
/// [`probabilistic_evidence`] instead.
pub fn probabilistic_scores(ledger: &SharingLedger, leaked: &Sequence) -> Result<Vec<f64>> {
    Ok(probabilistic_evidence(ledger, leaked)?
        .into_iter()
        .map(|e| -(-e).exp_m1())
        .collect())
}

/// Recipients by descending score, lowest index first on ties. 1-based.
pub fn rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.into_iter().map(|i| i + 1).collect()
}

/// 1-based index of the highest score, lowest index on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best + 1
}

pub fn detect_similarity(ledger: &SharingLedger, leaked: &Sequence) -> Result<DetectionResult> {
    let scores = similarity_scores(ledger, leaked)?;
    Ok(DetectionResult {
        accused: argmax(&scores),
        suspects: rank(&scores),
        scores,
        method: Method::Similarity,
        block_evidence: None,
        fallback: None,
    })
}

pub fn detect_probabilistic(ledger: &SharingLedger, leaked: &Sequence) -> Result<DetectionResult> {
    let scores = probabilistic_evidence(ledger, leaked)?;
    Ok(DetectionResult {
        accused: argmax(&scores),
        suspects: rank(&scores),
        scores,
        method: Method::Probabilistic,
        block_evidence: None,
        fallback: None,
    })
}

pub fn detect(
    ledger: &SharingLedger,
    leaked: &Sequence,
    method: Method,
) -> Result<DetectionResult> {
    match method {
        Method::Similarity => detect_similarity(ledger, leaked),
        Method::Probabilistic => detect_probabilistic(ledger, leaked),
        Method::Combined => detect_combined(ledger, leaked),
    }
}

/// Combined detection with similarity-ordered suspects.
pub fn detect_combined(ledger: &SharingLedger, leaked: &Sequence) -> Result<DetectionResult> {
    detect_combined_with(ledger, leaked, ScoreSource::Similarity)
}

/// If the best similarity exceeds 1/2, accuse its recipient. Otherwise take
/// the `floor(1/sim_max)` best recipients under `source` and accuse the first
/// whose codeword `w` is visible in the leak: block `w` mostly fingerprint
/// values and block `w - 1` mostly original values (codeword 1 checks only
/// block 1, the last codeword only the block before it).
pub fn detect_combined_with(
    ledger: &SharingLedger,
    leaked: &Sequence,
    source: ScoreSource,
) -> Result<DetectionResult> {
    let sims = similarity_scores(ledger, leaked)?;
    let n = sims.len();
    let top = argmax(&sims);
    let sim_max = sims[top - 1];
    let result = |accused, suspects, scores, evidence, fallback| DetectionResult {
        accused,
        scores,
        suspects,
        method: Method::Combined,
        block_evidence: evidence,
        fallback,
    };

    if sim_max > 0.5 {
        return Ok(result(top, vec![top], sims, None, None));
    }
    if sim_max == 0.0 {
        debug!("no recipient matches any fingerprint; using probabilistic scores");
        let evidence = probabilistic_evidence(ledger, leaked)?;
        let accused = argmax(&evidence);
        return Ok(result(
            accused,
            vec![accused],
            sims,
            None,
            Some(Fallback::ZeroSimilarity),
        ));
    }
    let Some(layout) = ledger.code_layout() else {
        debug!("ledger has no code layout; using similarity scores");
        return Ok(result(top, vec![top], sims, None, Some(Fallback::NoLayout)));
    };

    let ordering = match source {
        ScoreSource::Similarity => sims.clone(),
        ScoreSource::Probabilistic => probabilistic_evidence(ledger, leaked)?,
    };
    let size = ((1.0 / sim_max).floor() as usize).clamp(1, n);
    let suspects: Vec<usize> = rank(&ordering).into_iter().take(size).collect();
    let original = ledger.original();
    let c = layout.config().c();
    let mut evidence = Vec::with_capacity(size);
    let mut accused = None;
    for &i in &suspects {
        let w = ledger.records()[i - 1]
            .codeword_index
            .unwrap_or_else(|| layout.config().codeword_for(i));
        let check = block_check(leaked, original, layout, i, w, c);
        let passed = check.passed;
        evidence.push(check);
        if passed {
            accused = Some(i);
            break;
        }
    }
    let fallback = accused.is_none().then_some(Fallback::NoSuspectPassed);
    let accused = accused.unwrap_or_else(|| argmax(&ordering));
    Ok(result(
        accused,
        suspects,
        ordering,
        Some(evidence),
        fallback,
    ))
}

fn block_check(
    leaked: &Sequence,
    original: &Sequence,
    layout: &CodeLayout,
    sp_index: usize,
    w: usize,
    c: usize,
) -> SuspectEvidence {
    let previous_block = (w > 1).then(|| classify_block(leaked, original, layout, w - 1));
    let block = (w < c).then(|| classify_block(leaked, original, layout, w));
    let passed = previous_block.is_none_or(|b| b == BlockClass::Zeros)
        && block.is_none_or(|b| b == BlockClass::Ones);
    SuspectEvidence {
        sp_index,
        codeword: w,
        previous_block,
        block,
        passed,
    }
}
