//! Trial loop.
//!
//! Trial `t` of cell `c` draws everything from
//! `seed::derive(master_seed, [c, t])`, split further into one stream per
//! purpose (original, sharing, coalition, attack). Results therefore do not
//! depend on thread count or on how many other trials run.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use super::spec::{CellParams, CorpusSource, Detector, ExperimentSpec, Scheme, DEFAULT_L};
use crate::attacks::run_attack;
use crate::boneh_shaw::{
    bs_standalone_detect, recipient_seed, share_all, share_standalone, BsConfig,
};
use crate::correlation::CorrelationModel;
use crate::detection::{detect, similarity_scores, Fallback, Method};
use crate::fingerprint::{fingerprint_alg1, fingerprint_naive};
use crate::metrics::{attacker_utility, estimation_error, owner_utility, summarize};
use crate::model::{io, FingerprintParams, Sequence, SharingLedger};
use crate::privacy::{epsilon_from_keep_prob_m, hybrid_share, rr_share, BsChoice, HybridConfig};
use crate::seed::{self, stream};
use crate::{Error, Result};

/// Outcome of one trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    /// Colluders (1-based, ascending), space-separated.
    pub coalition: String,
    pub accused: usize,
    pub hit: u8,
    pub attacker_utility: f64,
    /// Empty when every point of the leak was removed.
    pub estimation_error: Option<f64>,
    pub fp_count: usize,
    pub fp_mean: f64,
    pub owner_utility: f64,
    pub sim_max: f64,
    pub fallback: String,
    pub collusion_fallbacks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialTiming {
    pub cell: usize,
    pub trial: usize,
    pub share_ms: f64,
    pub attack_ms: f64,
    pub detect_ms: f64,
}

/// Per-cell means and standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: usize,
    pub trials: usize,
    pub accuracy: f64,
    pub accuracy_std: f64,
    pub utility_mean: f64,
    pub utility_std: f64,
    pub error_mean: f64,
    pub error_std: f64,
    pub fp_count_mean: f64,
    pub fp_count_std: f64,
    pub owner_utility_mean: f64,
    pub sim_max_mean: f64,
    pub detection_fallbacks: usize,
    pub collusion_fallbacks: usize,
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub params: CellParams,
    /// Sequence length used by the cell.
    pub l: usize,
    pub trials: Vec<TrialRecord>,
    pub timings: Vec<TrialTiming>,
    pub summary: CellSummary,
}

#[derive(Clone, Debug)]
pub struct Results {
    pub name: String,
    pub cells: Vec<CellResult>,
}

/// Models and originals for the trials.
enum Corpus {
    Synthetic(BTreeMap<usize, CorrelationModel>),
    File {
        model: CorrelationModel,
        rows: Vec<Sequence>,
    },
}

impl Corpus {
    fn build(spec: &ExperimentSpec) -> Result<Self> {
        match &spec.corpus {
            CorpusSource::Synthetic(s) => {
                let mut models = BTreeMap::new();
                for cell in &spec.cells {
                    let l = cell.l.unwrap_or(DEFAULT_L);
                    if !models.contains_key(&l) {
                        models.insert(l, CorrelationModel::synthetic(&s.model_spec(l))?);
                    }
                }
                Ok(Corpus::Synthetic(models))
            }
            CorpusSource::File { path, smoothing } => {
                let rows = io::read_corpus(path, None)?;
                let model = CorrelationModel::estimate_from_corpus(&rows, *smoothing)?;
                for (i, cell) in spec.cells.iter().enumerate() {
                    if cell.l.is_some_and(|l| l != model.len()) {
                        return Err(Error::Config(format!(
                            "cell {i}: l = {} but {} has rows of {} points",
                            cell.l.unwrap(),
                            path.display(),
                            model.len()
                        )));
                    }
                }
                Ok(Corpus::File { model, rows })
            }
        }
    }

    fn model(&self, cell: &CellParams) -> &CorrelationModel {
        match self {
            Corpus::Synthetic(models) => &models[&cell.l.unwrap_or(DEFAULT_L)],
            Corpus::File { model, .. } => model,
        }
    }

    fn original(&self, cell: &CellParams, seed: u64) -> Sequence {
        match self {
            Corpus::Synthetic(_) => self.model(cell).sample_sequence(seed),
            Corpus::File { rows, .. } => rows[(seed % rows.len() as u64) as usize].clone(),
        }
    }
}

/// Seed of trial `trial` in cell `cell`.
pub fn trial_seed(master_seed: u64, cell: usize, trial: usize) -> u64 {
    seed::derive(master_seed, &[cell as u64, trial as u64])
}

/// Share `original` with the cell's recipients.
pub fn share(
    cell: &CellParams,
    original: &Sequence,
    model: &CorrelationModel,
    sharing_seed: u64,
) -> Result<SharingLedger> {
    let params = FingerprintParams::new(cell.p, cell.theta, cell.tau)?;
    let l = original.len();
    let bs_config = || match cell.bs_r {
        Some(r) => BsConfig::new(cell.bs_c, r),
        None => BsConfig::auto(cell.bs_c, cell.p * l as f64),
    };
    match cell.scheme {
        Scheme::Naive | Scheme::Alg1 => {
            let records = (1..=cell.num_sps)
                .into_par_iter()
                .map(|i| {
                    let s = recipient_seed(sharing_seed, i);
                    let g = match cell.scheme {
                        Scheme::Naive => fingerprint_naive(original, cell.p, s)?,
                        _ => fingerprint_alg1(original, &params, model, s)?,
                    };
                    Ok(g.into_record(i, s, None).1)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut ledger = SharingLedger::new(original.clone(), params)?;
            for r in records {
                ledger.push(r)?;
            }
            Ok(ledger)
        }
        Scheme::Bs => share_all(
            original,
            &params,
            model,
            bs_config()?,
            cell.num_sps,
            sharing_seed,
        ),
        Scheme::BsStandalone => share_standalone(
            original,
            &params,
            model,
            bs_config()?,
            cell.num_sps,
            sharing_seed,
        ),
        Scheme::Hybrid => {
            let bs = (cell.bs_c > 0).then_some(BsChoice {
                c: cell.bs_c,
                r: cell.bs_r,
            });
            let config = HybridConfig::new(cell.lambda, params, bs)?;
            hybrid_share(original, &config, model, cell.num_sps, sharing_seed)
        }
        Scheme::Rr => {
            let m = original.alphabet().size();
            let epsilon = match (cell.epsilon, cell.keep) {
                (Some(e), _) => e,
                (None, Some(q)) => epsilon_from_keep_prob_m(q, m)?,
                (None, None) => return Err(Error::Config("rr needs epsilon or keep".into())),
            };
            rr_share(original, epsilon, params, cell.num_sps, sharing_seed)
        }
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn run_trial(
    cell_index: usize,
    trial: usize,
    cell: &CellParams,
    corpus: &Corpus,
    master_seed: u64,
) -> Result<(TrialRecord, TrialTiming)> {
    let ts = trial_seed(master_seed, cell_index, trial);
    let model = corpus.model(cell);
    let original = corpus.original(cell, seed::derive(ts, &[stream::ORIGINAL]));

    let t0 = Instant::now();
    let ledger = share(cell, &original, model, seed::derive(ts, &[stream::SHARING]))?;
    let share_ms = ms(t0);

    let mut rng = seed::rng(seed::derive(ts, &[stream::COALITION]));
    let mut coalition: Vec<usize> = index::sample(&mut rng, cell.num_sps, cell.coalition_size)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    coalition.sort_unstable();

    let t1 = Instant::now();
    let attack_seed = seed::derive(ts, &[stream::ATTACK]);
    let outcome = if cell.attack_original {
        // Attack a copy of the original leaked "as" the first colluder.
        let mut clean = SharingLedger::new(original.clone(), *ledger.params())?;
        for r in ledger.records() {
            let mut r = r.clone();
            r.fingerprint = Default::default();
            clean.push(r)?;
        }
        run_attack(
            cell.attack,
            &clean,
            &cell.attack_config(coalition.clone()),
            model,
            attack_seed,
        )?
    } else {
        run_attack(
            cell.attack,
            &ledger,
            &cell.attack_config(coalition.clone()),
            model,
            attack_seed,
        )?
    };
    let attack_ms = ms(t1);
    let leaked = outcome.leaked;

    let t2 = Instant::now();
    let (accused, fallback) = match cell.detector {
        Detector::BsStandalone => {
            let layout = ledger.code_layout().ok_or_else(|| {
                Error::Config("bs-standalone detection needs a code layout".into())
            })?;
            let w = bs_standalone_detect(&leaked, &original, layout);
            let accused = (1..=cell.num_sps)
                .find(|&i| layout.config().codeword_for(i) == w)
                .unwrap_or(1);
            (accused, None)
        }
        d => {
            let method = match d {
                Detector::Sim => Method::Similarity,
                Detector::Prob => Method::Probabilistic,
                _ => Method::Combined,
            };
            let r = detect(&ledger, &leaked, method)?;
            (r.accused, r.fallback)
        }
    };
    let detect_ms = ms(t2);

    let sims = similarity_scores(&ledger, &leaked)?;
    let sim_max = sims.iter().copied().fold(0.0, f64::max);
    let counts: Vec<f64> = ledger.records().iter().map(|r| r.count() as f64).collect();
    let fp_count = ledger.records()[0].count();
    let copy1 = ledger.reconstruct_copy(1)?;
    let record = TrialRecord {
        cell: cell_index,
        trial,
        seed: ts,
        coalition: coalition
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" "),
        accused,
        hit: coalition.contains(&accused) as u8,
        attacker_utility: attacker_utility(&original, &leaked, None)?,
        estimation_error: estimation_error(&original, &leaked).ok(),
        fp_count,
        fp_mean: counts.iter().sum::<f64>() / counts.len() as f64,
        owner_utility: owner_utility(&original, &copy1, None)?,
        sim_max,
        fallback: fallback.map(fallback_name).unwrap_or_default().to_string(),
        collusion_fallbacks: outcome.fallbacks,
    };
    Ok((
        record,
        TrialTiming {
            cell: cell_index,
            trial,
            share_ms,
            attack_ms,
            detect_ms,
        },
    ))
}

fn fallback_name(f: Fallback) -> &'static str {
    match f {
        Fallback::ZeroSimilarity => "zero_similarity",
        Fallback::NoLayout => "no_layout",
        Fallback::NoSuspectPassed => "no_suspect_passed",
    }
}

fn summarize_cell(cell: usize, trials: &[TrialRecord]) -> CellSummary {
    let col = |f: &dyn Fn(&TrialRecord) -> f64| -> Vec<f64> { trials.iter().map(f).collect() };
    let hits = summarize(&col(&|t| t.hit as f64));
    let utility = summarize(&col(&|t| t.attacker_utility));
    let errors: Vec<f64> = trials.iter().filter_map(|t| t.estimation_error).collect();
    let error = summarize(&errors);
    let fp = summarize(&col(&|t| t.fp_count as f64));
    CellSummary {
        cell,
        trials: trials.len(),
        accuracy: hits.mean,
        accuracy_std: hits.std,
        utility_mean: utility.mean,
        utility_std: utility.std,
        error_mean: error.mean,
        error_std: error.std,
        fp_count_mean: fp.mean,
        fp_count_std: fp.std,
        owner_utility_mean: summarize(&col(&|t| t.owner_utility)).mean,
        sim_max_mean: summarize(&col(&|t| t.sim_max)).mean,
        detection_fallbacks: trials.iter().filter(|t| !t.fallback.is_empty()).count(),
        collusion_fallbacks: trials.iter().map(|t| t.collusion_fallbacks).sum(),
    }
}

/// Run every trial of every cell. Any failing trial aborts the run with the
/// cell and trial in the error message.
pub fn run(spec: &ExperimentSpec) -> Result<Results> {
    if spec.cells.is_empty() {
        return Err(Error::Config("experiment has no cells".into()));
    }
    let corpus = Corpus::build(spec)?;
    let jobs: Vec<(usize, usize)> = (0..spec.cells.len())
        .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
        .collect();
    let outputs = jobs
        .par_iter()
        .map(|&(c, t)| {
            run_trial(c, t, &spec.cells[c], &corpus, spec.master_seed)
                .map_err(|e| Error::Config(format!("{}: cell {c}, trial {t}: {e}", spec.name)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut outputs = outputs.into_iter();
    let cells = spec
        .cells
        .iter()
        .enumerate()
        .map(|(c, params)| {
            let (trials, timings): (Vec<_>, Vec<_>) = outputs.by_ref().take(spec.trials).unzip();
            let summary = summarize_cell(c, &trials);
            CellResult {
                params: params.clone(),
                l: corpus.model(params).len(),
                trials,
                timings,
                summary,
            }
        })
        .collect();
    Ok(Results {
        name: spec.name.clone(),
        cells,
    })
}
