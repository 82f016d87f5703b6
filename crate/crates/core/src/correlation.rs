//! Pairwise correlation model between consecutive data points.
//!
//! For every position `j` in `2..=l` the model holds an `m x m`
//! row-stochastic matrix whose row `a` is the distribution of `x_j` given
//! `x_{j-1} = a`. Matrices are position specific; [`CorrelationModel::stationary`]
//! replicates a single matrix when a homogeneous chain is wanted.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::model::{Alphabet, Sequence, State};
use crate::{seed, Error, Result};

const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationModel {
    l: usize,
    m: usize,
    marginal_first: Vec<f64>,
    /// `(l-1) * m * m` entries; matrix `t` (0-based) governs the step into
    /// position `t + 1` (0-based).
    cond: Vec<f64>,
}

fn check_distribution(row: &[f64], what: impl FnOnce() -> String) -> Result<()> {
    if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Model(format!(
            "{} has an entry outside [0,1]",
            what()
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::Model(format!("{} sums to {sum}, not 1", what())));
    }
    Ok(())
}

impl CorrelationModel {
    /// Build a model from nested `[position][from][to]` matrices.
    pub fn new(marginal_first: Vec<f64>, matrices: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let m = marginal_first.len();
        Alphabet::new(m)?;
        let l = matrices.len() + 1;
        let mut cond = Vec::with_capacity(matrices.len() * m * m);
        for (t, matrix) in matrices.iter().enumerate() {
            if matrix.len() != m || matrix.iter().any(|row| row.len() != m) {
                return Err(Error::Dimension(format!(
                    "matrix for position {} is not {m}x{m}",
                    t + 2
                )));
            }
            for row in matrix {
                cond.extend_from_slice(row);
            }
        }
        Self::from_flat(l, m, marginal_first, cond)
    }

    pub(crate) fn from_flat(
        l: usize,
        m: usize,
        marginal_first: Vec<f64>,
        cond: Vec<f64>,
    ) -> Result<Self> {
        if l == 0 {
            return Err(Error::Argument("model length must be at least 1".into()));
        }
        if marginal_first.len() != m || cond.len() != (l - 1) * m * m {
            return Err(Error::Dimension(format!(
                "model data does not match l = {l}, m = {m}"
            )));
        }
        check_distribution(&marginal_first, || "marginal_first".into())?;
        for (i, row) in cond.chunks(m).enumerate() {
            check_distribution(row, || {
                format!("row {} of the matrix for position {}", i % m, i / m + 2)
            })?;
        }
        Ok(CorrelationModel {
            l,
            m,
            marginal_first,
            cond,
        })
    }

    /// Homogeneous chain: the same transition matrix at every position.
    pub fn stationary(l: usize, marginal_first: Vec<f64>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        if l == 0 {
            return Err(Error::Argument("model length must be at least 1".into()));
        }
        Self::new(marginal_first, vec![matrix; l - 1])
    }

    /// Every transition equally likely.
    pub fn uniform(l: usize, m: usize) -> Result<Self> {
        let u = 1.0 / m as f64;
        Self::stationary(l, vec![u; m], vec![vec![u; m]; m])
    }

    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_states(&self) -> usize {
        self.m
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.m).expect("validated at construction")
    }

    pub fn marginal_first(&self) -> &[f64] {
        &self.marginal_first
    }

    /// Distribution of the state at 0-based position `j >= 1` given the state
    /// at `j - 1`.
    #[inline]
    pub fn row(&self, j: usize, prev: State) -> &[f64] {
        debug_assert!(j >= 1 && j < self.l);
        let start = ((j - 1) * self.m + prev as usize) * self.m;
        &self.cond[start..start + self.m]
    }

    /// `P(x_j = next | x_{j-1} = prev)` for 0-based `j`; 1 at `j = 0`.
    #[inline]
    pub fn cond(&self, j: usize, prev: State, next: State) -> f64 {
        if j == 0 {
            1.0
        } else {
            self.row(j, prev)[next as usize]
        }
    }

    /// Checked lookup with a 1-based position: `P(x_j = next | x_{j-1} = prev)`.
    /// The first position has no predecessor and returns 1.
    pub fn conditional(&self, j: usize, prev: State, next: State) -> Result<f64> {
        if j == 0 || j > self.l {
            return Err(Error::Argument(format!(
                "position {j} outside 1..={}",
                self.l
            )));
        }
        let a = self.alphabet();
        if !a.contains(prev) || !a.contains(next) {
            return Err(Error::Argument(format!(
                "states ({prev}, {next}) outside the alphabet"
            )));
        }
        Ok(self.cond(j - 1, prev, next))
    }

    /// Check a sequence is compatible with this model.
    pub fn check_sequence(&self, s: &Sequence) -> Result<()> {
        if s.len() != self.l {
            return Err(Error::Dimension(format!(
                "sequence has {} points, model has {}",
                s.len(),
                self.l
            )));
        }
        if s.alphabet().size() != self.m {
            return Err(Error::Dimension(format!(
                "sequence uses {} states, model has {}",
                s.alphabet().size(),
                self.m
            )));
        }
        Ok(())
    }

    /// Estimate transition matrices from a corpus by counting consecutive
    /// pairs, with `smoothing` pseudo-counts per cell. Rows with no
    /// observations fall back to uniform.
    pub fn estimate_from_corpus(corpus: &[Sequence], smoothing: f64) -> Result<Self> {
        let first = corpus
            .first()
            .ok_or_else(|| Error::Argument("corpus is empty".into()))?;
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::Argument(format!(
                "smoothing must be a non-negative number, got {smoothing}"
            )));
        }
        let (l, alphabet) = (first.len(), first.alphabet());
        let m = alphabet.size();
        for (i, s) in corpus.iter().enumerate() {
            if s.len() != l {
                return Err(Error::Dimension(format!(
                    "sequence {} has {} points, expected {l}",
                    i + 1,
                    s.len()
                )));
            }
            if s.alphabet() != alphabet {
                return Err(Error::Dimension(format!(
                    "sequence {} uses a different alphabet",
                    i + 1
                )));
            }
            if s.has_removed() {
                return Err(Error::Argument(format!(
                    "sequence {} contains removed points",
                    i + 1
                )));
            }
        }

        let mut first_counts = vec![0.0; m];
        let mut counts = vec![0.0; (l - 1) * m * m];
        for s in corpus {
            let v = s.values();
            first_counts[v[0] as usize] += 1.0;
            for t in 0..l - 1 {
                counts[(t * m + v[t] as usize) * m + v[t + 1] as usize] += 1.0;
            }
        }

        let normalise = |row: &mut [f64]| {
            let total: f64 = row.iter().sum::<f64>() + smoothing * m as f64;
            if total > 0.0 {
                row.iter_mut().for_each(|c| *c = (*c + smoothing) / total);
            } else {
                row.iter_mut().for_each(|c| *c = 1.0 / m as f64);
            }
        };
        normalise(&mut first_counts);
        counts.chunks_mut(m).for_each(normalise);
        Self::from_flat(l, m, first_counts, counts)
    }

    /// Draw one sequence: `x_1` from the first-point marginal, then each point
    /// from the row selected by its predecessor.
    pub fn sample_sequence(&self, seed: u64) -> Sequence {
        self.sample_with(&mut seed::rng(seed))
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Sequence {
        let mut values = Vec::with_capacity(self.l);
        let mut prev = sample_index(&self.marginal_first, rng.random::<f64>()) as State;
        values.push(prev);
        for j in 1..self.l {
            prev = sample_index(self.row(j, prev), rng.random::<f64>()) as State;
            values.push(prev);
        }
        Sequence::from_parts_unchecked(values, self.alphabet())
    }

    /// Random position-specific chain used as the default synthetic corpus.
    pub fn synthetic(spec: &SyntheticModel) -> Result<Self> {
        spec.validate()?;
        let m = spec.m;
        let mut rng = seed::rng(spec.seed);
        let flat = Gamma::new(spec.concentration, 1.0)
            .map_err(|e| Error::Argument(format!("invalid Dirichlet concentration: {e}")))?;
        let unit = Gamma::new(1.0, 1.0).expect("unit gamma");

        let marginal_first = dirichlet(&flat, m, &mut rng);
        let mut cond = Vec::with_capacity((spec.l - 1) * m * m);
        for _ in 0..(spec.l - 1) * m {
            if rng.random::<f64>() < spec.strong_fraction {
                let dominant = rng.random_range(0..m);
                let mut rest = dirichlet(&unit, m - 1, &mut rng).into_iter();
                for k in 0..m {
                    if k == dominant {
                        cond.push(spec.strong_mass);
                    } else {
                        cond.push((1.0 - spec.strong_mass) * rest.next().unwrap());
                    }
                }
            } else {
                cond.extend(dirichlet(&flat, m, &mut rng));
            }
        }
        // Renormalise away floating-point drift.
        for row in cond.chunks_mut(m) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        Self::from_flat(spec.l, m, marginal_first, cond)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&ModelFile::from(self))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path, format!("invalid model file: {e}")))?;
        file.into_model()
    }
}

/// Symmetric Dirichlet draw from normalised gamma variates.
fn dirichlet<R: Rng + ?Sized>(gamma: &Gamma<f64>, n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let draw: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let s: f64 = draw.iter().sum();
        if s > 0.0 {
            return draw.into_iter().map(|v| v / s).collect();
        }
    }
}

/// Inverse-CDF draw over a probability vector with a fixed state order.
#[inline]
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = k;
            if u < acc {
                return k;
            }
        }
    }
    // u landed in the rounding gap above the accumulated mass.
    last_positive
}

/// Parameters of the default synthetic corpus.
///
/// Each transition row is either a flat `Dirichlet(concentration)` draw or,
/// with probability `strong_fraction`, a near-deterministic row that puts
/// `strong_mass` on one random state and spreads the rest by `Dirichlet(1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticModel {
    pub l: usize,
    #[serde(default = "SyntheticModel::default_m")]
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "SyntheticModel::default_concentration")]
    pub concentration: f64,
    #[serde(default = "SyntheticModel::default_strong_fraction")]
    pub strong_fraction: f64,
    #[serde(default = "SyntheticModel::default_strong_mass")]
    pub strong_mass: f64,
}

impl SyntheticModel {
    fn default_m() -> usize {
        3
    }
    fn default_concentration() -> f64 {
        0.5
    }
    fn default_strong_fraction() -> f64 {
        0.5
    }
    fn default_strong_mass() -> f64 {
        0.75
    }

    pub fn new(l: usize, seed: u64) -> Self {
        SyntheticModel {
            l,
            m: Self::default_m(),
            seed,
            concentration: Self::default_concentration(),
            strong_fraction: Self::default_strong_fraction(),
            strong_mass: Self::default_strong_mass(),
        }
    }

    fn validate(&self) -> Result<()> {
        Alphabet::new(self.m)?;
        if self.l == 0 {
            return Err(Error::Argument(
                "synthetic model length must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.strong_fraction) || !(0.0..=1.0).contains(&self.strong_mass)
        {
            return Err(Error::Argument(
                "strong_fraction and strong_mass must lie in [0,1]".into(),
            ));
        }
        if !(self.concentration > 0.0) {
            return Err(Error::Argument(
                "Dirichlet concentration must be positive".into(),
            ));
        }
        Ok(())
    }
}

pub const MODEL_SCHEMA: &str = "corrfp-model/1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: String,
    l: usize,
    m: usize,
    marginal_first: Vec<f64>,
    /// `[position 2..=l][from][to]`.
    cond: Vec<Vec<Vec<f64>>>,
}

/// Round to 12 significant digits.
fn sig12(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    format!("{v:.11e}").parse().expect("formatted float parses")
}

impl From<&CorrelationModel> for ModelFile {
    fn from(model: &CorrelationModel) -> Self {
        let m = model.m;
        ModelFile {
            schema: MODEL_SCHEMA.into(),
            l: model.l,
            m,
            marginal_first: model.marginal_first.iter().copied().map(sig12).collect(),
            cond: model
                .cond
                .chunks(m * m)
                .map(|mat| {
                    mat.chunks(m)
                        .map(|row| row.iter().copied().map(sig12).collect())
                        .collect()
                })
                .collect(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<CorrelationModel> {
        if self.schema != MODEL_SCHEMA {
            return Err(Error::Argument(format!(
                "unsupported model schema {:?}",
                self.schema
            )));
        }
        if self.cond.len() + 1 != self.l {
            return Err(Error::Dimension(format!(
                "{} matrices for a model of length {}",
                self.cond.len(),
                self.l
            )));
        }
        if self.marginal_first.len() != self.m {
            return Err(Error::Dimension(
                "marginal_first does not have m entries".into(),
            ));
        }
        CorrelationModel::new(self.marginal_first, self.cond)
    }
}
