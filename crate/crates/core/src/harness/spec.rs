//! Experiment description files.
//!
//! ```toml
//! name = "fig6"
//! master_seed = 6
//! trials = 200
//!
//! [corpus]
//! source = "synthetic"        # or: source = "file", path = "corpus.csv"
//!
//! [base]                      # parameters shared by every cell
//! scheme = "alg1"
//! num_sps = 1000
//! attack = "corr"
//! p_f = 0.2
//!
//! [[grid]]                    # one cell per entry, overriding `base`
//! tau_c = 0.05
//! [[grid]]
//! tau_c = 0.2
//!
//! [sweep]                     # optional: cartesian product over lists
//! scheme = ["alg1", "naive"]
//! ```
//!
//! Cells are every grid entry crossed with every sweep combination (grid
//! entries outermost, sweep keys in alphabetical order, the last key
//! varying fastest).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackConfig, AttackKind, Spread};
use crate::correlation::SyntheticModel;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Independent per-point fingerprinting.
    Naive,
    /// Correlation-aware fingerprints, no code.
    Alg1,
    /// Correlation-aware fingerprints around Boneh-Shaw code bits.
    Bs,
    /// Boneh-Shaw code bits only.
    BsStandalone,
    /// Overlap-fraction mode (`lambda`), with Boneh-Shaw codes.
    Hybrid,
    /// One randomized-response copy for everybody.
    Rr,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Naive => "naive",
            Scheme::Alg1 => "alg1",
            Scheme::Bs => "bs",
            Scheme::BsStandalone => "bs-standalone",
            Scheme::Hybrid => "hybrid",
            Scheme::Rr => "rr",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detector {
    Sim,
    Prob,
    Combined,
    /// Classic Boneh-Shaw tracing on the code bits alone.
    BsStandalone,
}

impl Detector {
    pub fn name(self) -> &'static str {
        match self {
            Detector::Sim => "sim",
            Detector::Prob => "prob",
            Detector::Combined => "combined",
            Detector::BsStandalone => "bs-standalone",
        }
    }
}

/// Parameters of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellParams {
    /// Sequence length; a file corpus fixes it to the file's row length.
    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default = "defaults::p")]
    pub p: f64,
    #[serde(default = "defaults::theta")]
    pub theta: f64,
    #[serde(default = "defaults::tau")]
    pub tau: f64,
    #[serde(default = "defaults::num_sps")]
    pub num_sps: usize,
    #[serde(default = "defaults::scheme")]
    pub scheme: Scheme,
    #[serde(default = "defaults::bs_c")]
    pub bs_c: usize,
    /// Block size; absent sizes blocks from half the fingerprint budget.
    #[serde(default)]
    pub bs_r: Option<usize>,
    #[serde(default)]
    pub lambda: f64,
    /// Randomized-response privacy budget.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Randomized-response keep probability (alternative to `epsilon`).
    #[serde(default)]
    pub keep: Option<f64>,
    #[serde(default = "defaults::attack")]
    pub attack: AttackKind,
    #[serde(default)]
    pub p_f: f64,
    #[serde(default)]
    pub p_s: f64,
    #[serde(default)]
    pub tau_c: f64,
    /// Colluders' estimate of `p`; absent means they know `p`.
    #[serde(default)]
    pub p_e: Option<f64>,
    #[serde(default)]
    pub spread: Spread,
    #[serde(default = "defaults::coalition_size")]
    pub coalition_size: usize,
    /// Leak a copy of the original instead of a shared copy (single-copy
    /// attacks only).
    #[serde(default)]
    pub attack_original: bool,
    #[serde(default = "defaults::detector")]
    pub detector: Detector,
}

mod defaults {
    use super::{Detector, Scheme};
    use crate::attacks::AttackKind;

    pub fn p() -> f64 {
        0.1
    }
    pub fn theta() -> f64 {
        0.5
    }
    pub fn tau() -> f64 {
        0.05
    }
    pub fn num_sps() -> usize {
        10
    }
    pub fn scheme() -> Scheme {
        Scheme::Alg1
    }
    pub fn bs_c() -> usize {
        10
    }
    pub fn attack() -> AttackKind {
        AttackKind::None
    }
    pub fn coalition_size() -> usize {
        1
    }
    pub fn detector() -> Detector {
        Detector::Combined
    }
}

pub const DEFAULT_L: usize = 1000;

impl CellParams {
    pub fn validate(&self) -> Result<()> {
        crate::model::FingerprintParams::new(self.p, self.theta, self.tau)?;
        if self.num_sps == 0 {
            return Err(Error::Config("num_sps must be at least 1".into()));
        }
        if self.coalition_size == 0 || self.coalition_size > self.num_sps {
            return Err(Error::Config(format!(
                "coalition_size {} must lie in 1..={}",
                self.coalition_size, self.num_sps
            )));
        }
        if self.attack.is_collusion() && self.coalition_size < 2 {
            return Err(Error::Config(format!(
                "{} needs coalition_size >= 2",
                self.attack
            )));
        }
        if !self.attack.is_collusion() && self.coalition_size != 1 {
            return Err(Error::Config(format!(
                "{} is a single-copy attack; set coalition_size = 1",
                self.attack
            )));
        }
        if self.attack_original && self.attack.is_collusion() {
            return Err(Error::Config(
                "attack_original applies to single-copy attacks only".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda must be in [0,1], got {}",
                self.lambda
            )));
        }
        if self.scheme == Scheme::Rr && self.epsilon.is_some() == self.keep.is_some() {
            return Err(Error::Config(
                "the rr scheme needs exactly one of epsilon and keep".into(),
            ));
        }
        if self.detector == Detector::BsStandalone
            && !matches!(self.scheme, Scheme::Bs | Scheme::BsStandalone)
        {
            return Err(Error::Config(
                "the bs-standalone detector needs a Boneh-Shaw scheme".into(),
            ));
        }
        self.attack_config(vec![1])
            .validate(None)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn p_e(&self) -> f64 {
        self.p_e.unwrap_or(self.p)
    }

    pub fn attack_config(&self, coalition: Vec<usize>) -> AttackConfig {
        AttackConfig {
            p_f: self.p_f,
            p_s: self.p_s,
            tau_c: self.tau_c,
            p_e: self.p_e(),
            coalition,
            spread: self.spread,
        }
    }
}

/// Synthetic corpus settings; the chain length comes from each cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticCorpus {
    #[serde(default = "SyntheticCorpus::default_m")]
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub concentration: Option<f64>,
    #[serde(default)]
    pub strong_fraction: Option<f64>,
    #[serde(default)]
    pub strong_mass: Option<f64>,
}

impl SyntheticCorpus {
    fn default_m() -> usize {
        3
    }

    pub fn model_spec(&self, l: usize) -> SyntheticModel {
        let d = SyntheticModel::new(l, self.seed);
        SyntheticModel {
            m: self.m,
            concentration: self.concentration.unwrap_or(d.concentration),
            strong_fraction: self.strong_fraction.unwrap_or(d.strong_fraction),
            strong_mass: self.strong_mass.unwrap_or(d.strong_mass),
            ..d
        }
    }
}

impl Default for SyntheticCorpus {
    fn default() -> Self {
        SyntheticCorpus {
            m: Self::default_m(),
            seed: 0,
            concentration: None,
            strong_fraction: None,
            strong_mass: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum CorpusSource {
    /// Originals are fresh draws from a synthetic chain.
    Synthetic(SyntheticCorpus),
    /// Originals are rows of a CSV corpus; the model is estimated from it.
    File {
        path: PathBuf,
        #[serde(default = "CorpusSource::default_smoothing")]
        smoothing: f64,
    },
}

impl CorpusSource {
    fn default_smoothing() -> f64 {
        1.0
    }
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Synthetic(SyntheticCorpus::default())
    }
}

/// A parsed experiment: name, seeding, corpus and the expanded cells.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub master_seed: u64,
    pub trials: usize,
    pub corpus: CorpusSource,
    pub output_dir: Option<PathBuf>,
    pub cells: Vec<CellParams>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    name: String,
    #[serde(default)]
    master_seed: u64,
    trials: usize,
    #[serde(default)]
    corpus: CorpusSource,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    base: toml::Table,
    #[serde(default)]
    grid: Option<Vec<toml::Table>>,
    #[serde(default)]
    sweep: Option<toml::Table>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text)
            .map_err(|e| Error::Config(format!("invalid experiment spec: {e}")))?;
        file.into_spec()
    }

    /// Read a spec file. Relative corpus paths resolve against the spec's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_toml(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        if let CorpusSource::File { path: corpus, .. } = &mut spec.corpus {
            if corpus.is_relative() {
                if let Some(dir) = path.parent() {
                    *corpus = dir.join(&*corpus);
                }
            }
        }
        Ok(spec)
    }

    /// Keep the cells, change the trial count.
    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }
}

impl SpecFile {
    fn into_spec(self) -> Result<ExperimentSpec> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        let grid = match self.grid {
            Some(g) if g.is_empty() => return Err(Error::Config("grid is empty".into())),
            Some(g) => g,
            None if self.sweep.is_none() => {
                return Err(Error::Config("spec has neither grid nor sweep".into()))
            }
            None => vec![toml::Table::new()],
        };
        let combos = sweep_combinations(self.sweep.unwrap_or_default())?;

        let mut cells = Vec::with_capacity(grid.len() * combos.len());
        for entry in &grid {
            for combo in &combos {
                let mut table = self.base.clone();
                table.extend(entry.clone());
                table.extend(combo.clone());
                let cell: CellParams = toml::Value::Table(table)
                    .try_into()
                    .map_err(|e| Error::Config(format!("cell {}: {e}", cells.len())))?;
                cell.validate()
                    .map_err(|e| Error::Config(format!("cell {}: {e}", cells.len())))?;
                cells.push(cell);
            }
        }
        Ok(ExperimentSpec {
            name: self.name,
            master_seed: self.master_seed,
            trials: self.trials,
            corpus: self.corpus,
            output_dir: self.output_dir,
            cells,
        })
    }
}

fn sweep_combinations(sweep: toml::Table) -> Result<Vec<toml::Table>> {
    let mut combos = vec![toml::Table::new()];
    for (key, values) in sweep {
        let values = match values {
            toml::Value::Array(a) if !a.is_empty() => a,
            _ => {
                return Err(Error::Config(format!(
                    "sweep.{key} must be a non-empty list"
                )))
            }
        };
        combos = combos
            .into_iter()
            .flat_map(|c| {
                let key = &key;
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.insert(key.clone(), v.clone());
                    c
                })
            })
            .collect();
    }
    Ok(combos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_overrides_base_and_sweep_crosses() {
        let spec = ExperimentSpec::from_toml(
            r#"
            name = "t"
            trials = 3
            [base]
            p_f = 0.1
            attack = "flip"
            [[grid]]
            num_sps = 5
            [[grid]]
            num_sps = 7
            p_f = 0.3
            [sweep]
            tau = [0.05, 0.1]
            "#,
        )
        .unwrap();
        assert_eq!(spec.cells.len(), 4);
        assert_eq!(spec.cells[0].num_sps, 5);
        assert_eq!(spec.cells[0].tau, 0.05);
        assert_eq!(spec.cells[1].tau, 0.1);
        assert_eq!(spec.cells[2].p_f, 0.3);
        assert_eq!(spec.cells[3].num_sps, 7);
        assert_eq!(
            spec.corpus,
            CorpusSource::Synthetic(SyntheticCorpus::default())
        );
    }

    #[test]
    fn empty_grid_and_bad_cells_are_rejected() {
        assert!(ExperimentSpec::from_toml("name = \"t\"\ntrials = 1\ngrid = []\n").is_err());
        assert!(ExperimentSpec::from_toml("name = \"t\"\ntrials = 1\n").is_err());
        assert!(ExperimentSpec::from_toml("name = \"t\"\ntrials = 0\n[[grid]]\n").is_err());
        assert!(
            ExperimentSpec::from_toml("name = \"t\"\ntrials = 1\n[[grid]]\nbogus = 1\n").is_err()
        );
        let collusion_alone = "name = \"t\"\ntrials = 1\n[[grid]]\nattack = \"majority\"\n";
        assert!(ExperimentSpec::from_toml(collusion_alone).is_err());
    }

    #[test]
    fn file_corpus_parses() {
        let spec = ExperimentSpec::from_toml(
            "name = \"t\"\ntrials = 1\n[corpus]\nsource = \"file\"\npath = \"c.csv\"\n[[grid]]\n",
        )
        .unwrap();
        assert_eq!(
            spec.corpus,
            CorpusSource::File {
                path: "c.csv".into(),
                smoothing: 1.0
            }
        );
    }
}
