use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use corrfp::attacks::{run_attack, AttackConfig, AttackKind, Spread};
use corrfp::correlation::{CorrelationModel, SyntheticModel};
use corrfp::detection::{detect, Method};
use corrfp::harness::{self, CellParams, Detector, ExperimentSpec, Scheme};
use corrfp::model::io;
use corrfp::privacy::{epsilon_from_keep_prob_m, keep_probability, randomized_response_m};

#[derive(Parser)]
#[command(
    name = "corrfp",
    version,
    about = "Fingerprint correlated sequences, attack copies, trace leaks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a correlation model from a CSV corpus (one sequence per row).
    Estimate {
        #[arg(long)]
        corpus: PathBuf,
        /// Additive smoothing applied to every transition count.
        #[arg(long, default_value_t = 1.0)]
        smoothing: f64,
        /// Alphabet size; inferred from the data when absent.
        #[arg(long)]
        states: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample sequences from a model, or from a synthetic one.
    Synth {
        /// Model file; omit to draw a synthetic 3-state model.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Length of the synthetic model.
        #[arg(long, default_value_t = 1000)]
        length: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also save the synthetic model here.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Fingerprint one sequence for several recipients and write the ledger.
    Share(ShareArgs),
    /// Produce a leaked copy from ledger copies.
    Attack(AttackArgs),
    /// Attribute a leaked copy to a recipient.
    Detect {
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        leaked: PathBuf,
        #[arg(long, default_value = "combined")]
        method: Method,
        /// JSON report; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized response: convert between epsilon and keep probability,
    /// and optionally perturb a sequence.
    Rr {
        #[arg(long, conflicts_with = "keep", required_unless_present = "keep")]
        epsilon: Option<f64>,
        #[arg(long)]
        keep: Option<f64>,
        #[arg(long, default_value_t = 3)]
        states: usize,
        #[arg(long, requires = "out")]
        original: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run experiment grids.
    Experiment {
        #[command(subcommand)]
        command: ExperimentCommand,
    },
}

#[derive(Args)]
struct ShareArgs {
    /// CSV file whose first row is the original sequence.
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, default_value_t = 1)]
    sps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    ledger: PathBuf,
    /// Embed Boneh-Shaw codes with this many codewords.
    #[arg(long)]
    bs_c: Option<usize>,
    /// Block size, or `auto` to size blocks from the fingerprint budget.
    #[arg(long, default_value = "auto", requires = "bs_c")]
    bs_r: String,
    /// Overlap fraction shared by every copy.
    #[arg(long)]
    lambda: Option<f64>,
    /// Use independent per-point fingerprints instead.
    #[arg(long, conflicts_with_all = ["bs_c", "lambda"])]
    naive: bool,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    ledger: PathBuf,
    /// Correlation model; needed by `corr` and `pmajority`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    kind: AttackKind,
    /// Comma-separated 1-based recipient indices.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    coalition: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    pf: f64,
    #[arg(long, default_value_t = 0.0)]
    ps: f64,
    #[arg(long, default_value_t = 0.0)]
    tauc: f64,
    /// Colluders' estimate of p; defaults to the ledger's p.
    #[arg(long)]
    pe: Option<f64>,
    /// Give each other state p_e instead of p_e / (m - 1).
    #[arg(long)]
    whole_pe: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Run a spec file or a bundled experiment by name.
    Run {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory; overrides the spec's.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trials per cell; overrides the spec's.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// List bundled experiments.
    List,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate {
            corpus,
            smoothing,
            states,
            out,
        } => {
            let rows = io::read_corpus(&corpus, states)?;
            let model = CorrelationModel::estimate_from_corpus(&rows, smoothing)?;
            model.save(&out)?;
            eprintln!(
                "estimated l = {}, m = {} from {} sequences",
                model.len(),
                model.num_states(),
                rows.len()
            );
        }
        Command::Synth {
            model,
            length,
            count,
            seed,
            out,
            model_out,
        } => {
            let model = match model {
                Some(path) => CorrelationModel::load(&path)?,
                None => CorrelationModel::synthetic(&SyntheticModel::new(length, seed))?,
            };
            if let Some(path) = model_out {
                model.save(&path)?;
            }
            let rows: Vec<_> = (0..count)
                .map(|k| model.sample_sequence(corrfp::seed::derive(seed, &[k as u64])))
                .collect();
            io::write_corpus(&out, &rows)?;
        }
        Command::Share(args) => share(args)?,
        Command::Attack(args) => attack(args)?,
        Command::Detect {
            ledger,
            leaked,
            method,
            out,
        } => {
            let ledger = io::load_ledger(&ledger)?;
            let leaked = io::read_row(&leaked, ledger.original().alphabet())?;
            let result = detect(&ledger, &leaked, method)?;
            let json = serde_json::to_string_pretty(&result)?;
            match out {
                Some(path) => write_text(&path, &json)?,
                None => println!("{json}"),
            }
            eprintln!("accused recipient {}", result.accused);
        }
        Command::Rr {
            epsilon,
            keep,
            states,
            original,
            seed,
            out,
        } => {
            let epsilon = match (epsilon, keep) {
                (Some(e), _) => e,
                (None, Some(q)) => epsilon_from_keep_prob_m(q, states)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            println!("epsilon = {epsilon}");
            println!("keep = {}", keep_probability(epsilon, states)?);
            if let (Some(original), Some(out)) = (original, out) {
                let alphabet = corrfp::Alphabet::new(states)?;
                let x = io::read_row(&original, alphabet)?;
                io::write_row(&out, &randomized_response_m(&x, epsilon, seed)?)?;
            }
        }
        Command::Experiment { command } => match command {
            ExperimentCommand::List => {
                for (name, _) in harness::BUNDLED {
                    let spec = harness::bundled(name)?;
                    println!(
                        "{name}\t{} cells x {} trials",
                        spec.cells.len(),
                        spec.trials
                    );
                }
            }
            ExperimentCommand::Run {
                spec,
                threads,
                out,
                trials,
            } => {
                if let Some(n) = threads {
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build_global()
                        .context("configuring the thread pool")?;
                }
                let mut spec = load_spec(&spec)?;
                if let Some(t) = trials {
                    spec = spec.with_trials(t);
                }
                let dir = out
                    .or_else(|| spec.output_dir.clone())
                    .unwrap_or_else(|| PathBuf::from("results"));
                let results = harness::run(&spec)?;
                let files = harness::report::write(&results, &dir)?;
                for cell in &results.cells {
                    let s = &cell.summary;
                    println!(
                        "cell {:>3}  accuracy {:.3}  utility {:.3}  error {:.3}  fp {:.1}",
                        s.cell, s.accuracy, s.utility_mean, s.error_mean, s.fp_count_mean
                    );
                }
                eprintln!("wrote {}", files.aggregate.display());
            }
        },
    }
    Ok(())
}

fn load_spec(spec: &str) -> Result<ExperimentSpec> {
    let path = Path::new(spec);
    if path.exists() {
        return Ok(ExperimentSpec::load(path)?);
    }
    harness::bundled(spec)
        .with_context(|| format!("{spec} is neither a file nor a bundled experiment"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))
}

fn share(a: ShareArgs) -> Result<()> {
    let model = CorrelationModel::load(&a.model)?;
    let original = io::read_row(&a.original, model.alphabet())?;
    let bs_r = match a.bs_r.as_str() {
        "auto" => None,
        r => Some(
            r.parse()
                .with_context(|| format!("--bs-r takes a number or auto, got {r}"))?,
        ),
    };
    let scheme = match (a.naive, a.lambda, a.bs_c) {
        (true, _, _) => Scheme::Naive,
        (_, Some(_), _) => Scheme::Hybrid,
        (_, None, Some(_)) => Scheme::Bs,
        (_, None, None) => Scheme::Alg1,
    };
    // Hybrid without --bs-c runs with the code disabled.
    let cell = CellParams {
        l: Some(original.len()),
        p: a.p,
        theta: a.theta,
        tau: a.tau,
        num_sps: a.sps,
        scheme,
        bs_c: a.bs_c.unwrap_or(0),
        bs_r,
        lambda: a.lambda.unwrap_or(0.0),
        epsilon: None,
        keep: None,
        attack: AttackKind::None,
        p_f: 0.0,
        p_s: 0.0,
        tau_c: 0.0,
        p_e: None,
        spread: Spread::Split,
        coalition_size: 1,
        attack_original: false,
        detector: Detector::Combined,
    };
    let ledger = harness::share(&cell, &original, &model, a.seed)?;
    io::save_ledger(&a.ledger, &ledger)?;
    let counts: Vec<usize> = ledger.records().iter().map(|r| r.count()).collect();
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    eprintln!(
        "{} copies, {mean:.1} fingerprints each on average",
        counts.len()
    );
    Ok(())
}

fn attack(a: AttackArgs) -> Result<()> {
    let ledger = io::load_ledger(&a.ledger)?;
    let model = match &a.model {
        Some(path) => CorrelationModel::load(path)?,
        None if matches!(a.kind, AttackKind::Corr | AttackKind::Pmajority) => {
            bail!("the {} attack needs --model", a.kind)
        }
        None => {
            CorrelationModel::uniform(ledger.original().len(), ledger.original().alphabet().size())?
        }
    };
    let config = AttackConfig {
        p_f: a.pf,
        p_s: a.ps,
        tau_c: a.tauc,
        p_e: a.pe.unwrap_or(ledger.params().p()),
        coalition: a.coalition,
        spread: if a.whole_pe {
            Spread::Whole
        } else {
            Spread::Split
        },
    };
    let output = run_attack(a.kind, &ledger, &config, &model, a.seed)?;
    io::write_row(&a.out, &output.leaked)?;
    if output.fallbacks > 0 {
        eprintln!("{} positions fell back to a plain vote", output.fallbacks);
    }
    Ok(())
}
