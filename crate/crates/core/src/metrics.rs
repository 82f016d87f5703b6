//! Utility, accuracy and estimation error.

use serde::{Deserialize, Serialize};

use crate::model::{Sequence, REMOVED};
use crate::{Error, Result};

/// Per-point utility weights `u_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityWeights {
    u: Vec<f64>,
}

impl UtilityWeights {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::Argument(
                "utility weights must be finite and non-negative".into(),
            ));
        }
        if !(u.iter().sum::<f64>() > 0.0) {
            return Err(Error::Argument("utility weights sum to zero".into()));
        }
        Ok(UtilityWeights { u })
    }

    pub fn unit(l: usize) -> Result<Self> {
        Self::new(vec![1.0; l])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }
}

fn check_pair(a: &Sequence, b: &Sequence) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "sequences have {} and {} points",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Weighted mean of `+1` per matching point and `-1` per mismatch; removed
/// points count as mismatches. `None` means unit weights.
fn utility(original: &Sequence, other: &Sequence, weights: Option<&UtilityWeights>) -> Result<f64> {
    check_pair(original, other)?;
    let pairs = original.values().iter().zip(other.values());
    match weights {
        None => {
            let mismatches = pairs.filter(|(x, y)| x != y).count();
            Ok(1.0 - 2.0 * mismatches as f64 / original.len() as f64)
        }
        Some(w) => {
            if w.u.len() != original.len() {
                return Err(Error::Dimension(format!(
                    "{} weights for {} points",
                    w.u.len(),
                    original.len()
                )));
            }
            let (mut num, mut den) = (0.0, 0.0);
            for ((x, y), &u) in pairs.zip(&w.u) {
                num += if x == y { u } else { -u };
                den += u;
            }
            Ok(num / den)
        }
    }
}

/// Utility of a shared copy to its recipient.
pub fn owner_utility(
    original: &Sequence,
    copy: &Sequence,
    weights: Option<&UtilityWeights>,
) -> Result<f64> {
    utility(original, copy, weights)
}

/// Utility of a leaked copy to whoever obtains it.
pub fn attacker_utility(
    original: &Sequence,
    leaked: &Sequence,
    weights: Option<&UtilityWeights>,
) -> Result<f64> {
    utility(original, leaked, weights)
}

/// Fraction of trials whose accused recipient belongs to the coalition.
pub fn accuracy<'a, I>(trials: I) -> Result<f64>
where
    I: IntoIterator<Item = (usize, &'a [usize])>,
{
    let (mut hits, mut total) = (0usize, 0usize);
    for (accused, coalition) in trials {
        total += 1;
        if coalition.contains(&accused) {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::Argument("accuracy over zero trials".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Mean absolute difference of state codes over the points the leak
/// discloses.
pub fn estimation_error(original: &Sequence, leaked: &Sequence) -> Result<f64> {
    check_pair(original, leaked)?;
    let (mut sum, mut count) = (0i64, 0usize);
    for (&x, &y) in original.values().iter().zip(leaked.values()) {
        if y != REMOVED && x != REMOVED {
            sum += (x - y).abs() as i64;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Undefined(
            "estimation error of a copy with every point removed".into(),
        ));
    }
    Ok(sum as f64 / count as f64)
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            n,
            mean: f64::NAN,
            std: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary { n, mean, std }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Alphabet;

    fn seq(v: &[i32]) -> Sequence {
        Sequence::leaked(v.to_vec(), Alphabet::new(3).unwrap()).unwrap()
    }

    #[test]
    fn utility_extremes() {
        let x = seq(&[0, 1, 2, 0]);
        assert_eq!(owner_utility(&x, &x, None).unwrap(), 1.0);
        assert_eq!(owner_utility(&x, &seq(&[1, 2, 0, 1]), None).unwrap(), -1.0);
        assert_eq!(
            attacker_utility(&x, &seq(&[0, REMOVED, 2, 0]), None).unwrap(),
            0.5
        );
    }

    #[test]
    fn ten_percent_fingerprinted_gives_point_eight() {
        let x = seq(&[0; 100]);
        let mut y = vec![0; 100];
        y[..10].fill(1);
        assert!((owner_utility(&x, &seq(&y), None).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn weighted_utility() {
        let x = seq(&[0, 0, 0]);
        let y = seq(&[0, 1, 0]);
        let w = UtilityWeights::new(vec![1.0, 2.0, 1.0]).unwrap();
        assert!((owner_utility(&x, &y, Some(&w)).unwrap()).abs() < 1e-12);
        let scaled = UtilityWeights::new(vec![3.0, 6.0, 3.0]).unwrap();
        assert!((owner_utility(&x, &y, Some(&scaled)).unwrap()).abs() < 1e-12);
        assert!(UtilityWeights::new(vec![0.0, 0.0]).is_err());
        assert!(UtilityWeights::new(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn accuracy_counts_hits() {
        let coalition = [2usize, 5];
        let trials = [
            (2, &coalition[..]),
            (3, &coalition[..]),
            (5, &coalition[..]),
            (1, &coalition[..]),
        ];
        assert_eq!(accuracy(trials).unwrap(), 0.5);
        assert!(accuracy(std::iter::empty()).is_err());
    }

    #[test]
    fn estimation_error_cases() {
        let x = seq(&[0, 0, 0]);
        assert_eq!(estimation_error(&x, &x).unwrap(), 0.0);
        assert_eq!(estimation_error(&x, &seq(&[2, 2, 2])).unwrap(), 2.0);
        assert_eq!(estimation_error(&x, &seq(&[2, REMOVED, 0])).unwrap(), 1.0);
        assert!(matches!(
            estimation_error(&x, &seq(&[REMOVED; 3])),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(summarize(&[7.0]).std, 0.0);
    }
}
