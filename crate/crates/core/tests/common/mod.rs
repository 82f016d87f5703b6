//! Reference implementations used as oracles by the integration tests.
//! They favour obviousness over speed and share no code with the crate.

#![allow(dead_code)]

use corrfp::{Sequence, SharingLedger, REMOVED};

/// Sharing distribution at a position `j >= 1`, written straight from the
/// ladder: exclude states below `tau` (and those that cannot reach a fixed
/// next value), give the truth `1 - prob`, split what is left over the other
/// survivors in proportion to their conditionals. `None` marks the
/// degenerate case where every state was excluded.
pub fn ladder(
    row: &[f64],
    next_col: Option<&[f64]>,
    truth: usize,
    prob: f64,
    tau: f64,
) -> Option<Vec<f64>> {
    let m = row.len();
    let allowed: Vec<bool> = (0..m)
        .map(|k| row[k] >= tau && next_col.map_or(true, |col| col[k] >= tau))
        .collect();
    if !allowed.iter().any(|&a| a) {
        return None;
    }
    let others: Vec<usize> = (0..m).filter(|&k| k != truth && allowed[k]).collect();
    let mut out = vec![0.0; m];
    if others.is_empty() {
        out[truth] = 1.0;
        return Some(out);
    }
    let remaining = if allowed[truth] {
        out[truth] = 1.0 - prob;
        prob
    } else {
        1.0
    };
    let weight: f64 = others.iter().map(|&k| row[k]).sum();
    for &k in &others {
        out[k] = remaining * row[k] / weight;
    }
    Some(out)
}

/// Closed-form vote distribution: `t_k = (1-p_e)^c_k * q^(n-c_k) * cond_k`,
/// normalised over states, with `q = p_e / (m-1)`.
pub fn t_normalised(counts: &[usize], n: usize, p_e: f64, cond: &[f64]) -> Vec<f64> {
    let m = counts.len();
    let q = p_e / (m as f64 - 1.0);
    let t: Vec<f64> = (0..m)
        .map(|k| (1.0 - p_e).powi(counts[k] as i32) * q.powi((n - counts[k]) as i32) * cond[k])
        .collect();
    let total: f64 = t.iter().sum();
    t.iter().map(|v| v / total).collect()
}

/// Guilt probabilities by direct products over every recipient's copy:
/// at each disclosed point where the recipient agrees with the leak, multiply
/// by `1 - 1/|V_j|`, `V_j` being the recipients whose copies agree too.
pub fn guilt_by_hand(ledger: &SharingLedger, leaked: &Sequence) -> Vec<f64> {
    let copies: Vec<Sequence> = (1..=ledger.num_recipients())
        .map(|i| ledger.reconstruct_copy(i).unwrap())
        .collect();
    copies
        .iter()
        .map(|copy| {
            let mut prod = 1.0;
            for j in 0..leaked.len() {
                let y = leaked[j];
                if y == REMOVED || copy[j] != y {
                    continue;
                }
                let holders = copies.iter().filter(|c| c[j] == y).count();
                prod *= 1.0 - 1.0 / holders as f64;
            }
            1.0 - prod
        })
        .collect()
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_sf(n: u64, p: f64, k: u64) -> f64 {
    let mut term = (1.0 - p).powi(n as i32);
    let mut cdf = 0.0;
    for i in 0..k {
        cdf += term;
        term *= (n - i) as f64 / (i + 1) as f64 * p / (1.0 - p);
    }
    1.0 - cdf
}

/// Median of repeated wall-clock measurements in milliseconds.
pub fn median_ms(reps: usize, mut f: impl FnMut()) -> f64 {
    let mut times: Vec<f64> = (0..reps)
        .map(|_| {
            let t = std::time::Instant::now();
            f();
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times[reps / 2]
}
