//! CSV output of an experiment run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::Results;
use crate::{Error, Result};

#[derive(Serialize)]
struct AggregateRow<'a> {
    cell: usize,
    scheme: &'a str,
    l: usize,
    p: f64,
    theta: f64,
    tau: f64,
    num_sps: usize,
    bs_c: usize,
    bs_r: Option<usize>,
    lambda: f64,
    epsilon: Option<f64>,
    keep: Option<f64>,
    attack: &'a str,
    p_f: f64,
    p_s: f64,
    tau_c: f64,
    p_e: f64,
    coalition_size: usize,
    detector: &'a str,
    trials: usize,
    accuracy: f64,
    accuracy_std: f64,
    utility_mean: f64,
    utility_std: f64,
    error_mean: f64,
    error_std: f64,
    fp_count_mean: f64,
    fp_count_std: f64,
    owner_utility_mean: f64,
    sim_max_mean: f64,
    detection_fallbacks: usize,
    collusion_fallbacks: usize,
}

const COLUMNS: &str = "\
<name>_trials.csv: one row per (cell, trial)
  cell                 grid cell index (0-based, order of the spec)
  trial                trial index within the cell
  seed                 trial seed derived from the master seed, cell and trial
  coalition            leaking recipients, 1-based, space-separated
  accused              recipient accused by the detector
  hit                  1 if the accused recipient is in the coalition
  attacker_utility     utility of the leaked copy (+1 match, -1 mismatch or removed, mean)
  estimation_error     mean |x_j - y_j| over disclosed points; empty if all removed
  fp_count             fingerprinted points in recipient 1's copy
  fp_mean              mean fingerprinted points over all recipients
  owner_utility        utility of recipient 1's copy
  sim_max              highest similarity score
  fallback             why the combined detector skipped the block check, if it did
  collusion_fallbacks  positions where the probabilistic vote had no weight

<name>_aggregate.csv: one row per cell
  cell .. detector     cell parameters (l resolved; p_e resolved to p when unset)
  trials               trials in the cell
  accuracy             fraction of hits
  accuracy_std         sample standard deviation of hit
  utility_mean/_std    attacker utility
  error_mean/_std      estimation error over trials where it is defined
  fp_count_mean/_std   fingerprints in recipient 1's copy
  owner_utility_mean   utility of recipient 1's copy
  sim_max_mean         mean highest similarity
  detection_fallbacks  trials where the combined detector fell back to an argmax
  collusion_fallbacks  total positions where the probabilistic vote had no weight

<name>_timings.csv: wall-clock milliseconds per trial (not reproducible)
  cell, trial
  share_ms             generating every copy and the ledger
  attack_ms            producing the leak
  detect_ms            attributing the leak
";

/// Files written by [`write`].
#[derive(Clone, Debug)]
pub struct ReportFiles {
    pub trials: PathBuf,
    pub aggregate: PathBuf,
    pub columns: PathBuf,
    pub timings: PathBuf,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write the trial, aggregate and timing tables plus the column dictionary
/// into `dir`. Everything except the timings is a pure function of the
/// spec.
pub fn write(results: &Results, dir: impl AsRef<Path>) -> Result<ReportFiles> {
    let dir = dir.as_ref();
    if results.cells.is_empty() {
        return Err(Error::Config("no results to report".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = &results.name;
    let files = ReportFiles {
        trials: dir.join(format!("{name}_trials.csv")),
        aggregate: dir.join(format!("{name}_aggregate.csv")),
        columns: dir.join(format!("{name}_columns.txt")),
        timings: dir.join(format!("{name}_timings.csv")),
    };

    write_csv(&files.trials, results.cells.iter().flat_map(|c| &c.trials))?;
    write_csv(
        &files.timings,
        results.cells.iter().flat_map(|c| &c.timings),
    )?;
    write_csv(
        &files.aggregate,
        results.cells.iter().map(|c| {
            let p = &c.params;
            let s = &c.summary;
            AggregateRow {
                cell: s.cell,
                scheme: p.scheme.name(),
                l: c.l,
                p: p.p,
                theta: p.theta,
                tau: p.tau,
                num_sps: p.num_sps,
                bs_c: p.bs_c,
                bs_r: p.bs_r,
                lambda: p.lambda,
                epsilon: p.epsilon,
                keep: p.keep,
                attack: p.attack.name(),
                p_f: p.p_f,
                p_s: p.p_s,
                tau_c: p.tau_c,
                p_e: p.p_e(),
                coalition_size: p.coalition_size,
                detector: p.detector.name(),
                trials: s.trials,
                accuracy: s.accuracy,
                accuracy_std: s.accuracy_std,
                utility_mean: s.utility_mean,
                utility_std: s.utility_std,
                error_mean: s.error_mean,
                error_std: s.error_std,
                fp_count_mean: s.fp_count_mean,
                fp_count_std: s.fp_count_std,
                owner_utility_mean: s.owner_utility_mean,
                sim_max_mean: s.sim_max_mean,
                detection_fallbacks: s.detection_fallbacks,
                collusion_fallbacks: s.collusion_fallbacks,
            }
        }),
    )?;
    fs::write(&files.columns, COLUMNS.replace("<name>", name))
        .map_err(|e| Error::io(&files.columns, e))?;
    Ok(files)
}
