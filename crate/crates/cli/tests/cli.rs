use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn corrfp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrfp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = corrfp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn share_attack_detect_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "synth",
            "--length",
            "400",
            "--count",
            "30",
            "--seed",
            "3",
            "--out",
            "corpus.csv",
            "--model-out",
            "truth.json",
        ],
    );
    assert_eq!(
        fs::read_to_string(d.join("corpus.csv"))
            .unwrap()
            .lines()
            .count(),
        30
    );

    ok(
        d,
        &["estimate", "--corpus", "corpus.csv", "--out", "model.json"],
    );
    ok(
        d,
        &[
            "synth",
            "--model",
            "truth.json",
            "--count",
            "1",
            "--seed",
            "9",
            "--out",
            "original.csv",
        ],
    );
    ok(
        d,
        &[
            "share",
            "--original",
            "original.csv",
            "--model",
            "truth.json",
            "--sps",
            "12",
            "--seed",
            "5",
            "--bs-c",
            "6",
            "--ledger",
            "ledger.json",
        ],
    );
    let ledger: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("ledger.json")).unwrap()).unwrap();
    assert!(ledger.to_string().contains("sp_index"));

    ok(
        d,
        &[
            "attack",
            "--ledger",
            "ledger.json",
            "--kind",
            "none",
            "--coalition",
            "4",
            "--out",
            "leak.csv",
        ],
    );
    let report = ok(
        d,
        &[
            "detect",
            "--ledger",
            "ledger.json",
            "--leaked",
            "leak.csv",
            "--method",
            "sim",
        ],
    );
    let result: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(result["accused"], 4);
    assert_eq!(result["scores"].as_array().unwrap().len(), 12);

    ok(
        d,
        &[
            "attack",
            "--ledger",
            "ledger.json",
            "--model",
            "truth.json",
            "--kind",
            "pmajority",
            "--coalition",
            "2,7",
            "--pf",
            "0.05",
            "--tauc",
            "0.1",
            "--seed",
            "1",
            "--out",
            "coalition.csv",
        ],
    );
    ok(
        d,
        &[
            "detect",
            "--ledger",
            "ledger.json",
            "--leaked",
            "coalition.csv",
            "--out",
            "result.json",
        ],
    );
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("result.json")).unwrap()).unwrap();
    assert!(result["accused"].as_u64().unwrap() >= 1);
}

#[test]
fn correlation_attacks_need_a_model() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "synth",
            "--length",
            "50",
            "--out",
            "original.csv",
            "--model-out",
            "m.json",
        ],
    );
    ok(
        d,
        &[
            "share",
            "--original",
            "original.csv",
            "--model",
            "m.json",
            "--sps",
            "3",
            "--naive",
            "--ledger",
            "l.json",
        ],
    );
    let out = corrfp(
        d,
        &[
            "attack", "--ledger", "l.json", "--kind", "corr", "--out", "y.csv",
        ],
    );
    assert!(!out.status.success());
    assert!(!d.join("y.csv").exists());
}

#[test]
fn randomized_response_reports_its_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let text = ok(d, &["rr", "--keep", "0.9"]);
    let eps: f64 = text
        .lines()
        .next()
        .unwrap()
        .trim_start_matches("epsilon = ")
        .parse()
        .unwrap();
    assert!((eps - 18f64.ln()).abs() < 1e-12);

    ok(d, &["synth", "--length", "100", "--out", "x.csv"]);
    let text = ok(
        d,
        &[
            "rr",
            "--epsilon",
            "2.89",
            "--original",
            "x.csv",
            "--seed",
            "2",
            "--out",
            "noisy.csv",
        ],
    );
    assert!(text.contains("keep = 0.8"));
    let noisy = fs::read_to_string(d.join("noisy.csv")).unwrap();
    assert_eq!(noisy.trim().split(',').count(), 100);
}

#[test]
fn experiments_list_and_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let listing = ok(d, &["experiment", "list"]);
    for name in ["fig5", "table2", "rr-baseline"] {
        assert!(
            listing.lines().any(|l| l.starts_with(name)),
            "{name} missing"
        );
    }

    fs::write(
        d.join("tiny.toml"),
        "name = \"tiny\"\ntrials = 3\n[[grid]]\nl = 200\nnum_sps = 5\nattack = \"flip\"\np_f = 0.1\ndetector = \"sim\"\n",
    )
    .unwrap();
    let printed = ok(
        d,
        &[
            "experiment",
            "run",
            "--spec",
            "tiny.toml",
            "--out",
            "res",
            "--threads",
            "1",
        ],
    );
    assert!(printed.contains("accuracy"));
    for suffix in ["trials.csv", "aggregate.csv", "columns.txt", "timings.csv"] {
        assert!(
            d.join("res").join(format!("tiny_{suffix}")).exists(),
            "{suffix}"
        );
    }
    let first = fs::read(d.join("res/tiny_trials.csv")).unwrap();
    ok(
        d,
        &["experiment", "run", "--spec", "tiny.toml", "--out", "again"],
    );
    assert_eq!(first, fs::read(d.join("again/tiny_trials.csv")).unwrap());
}

#[test]
fn bad_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("empty.toml"),
        "name = \"e\"\ntrials = 1\ngrid = []\n",
    )
    .unwrap();
    let out = corrfp(
        d,
        &["experiment", "run", "--spec", "empty.toml", "--out", "res"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid is empty"));
    assert!(!d.join("res").exists());

    assert!(
        !corrfp(d, &["experiment", "run", "--spec", "no-such-experiment"])
            .status
            .success()
    );
    assert!(!corrfp(
        d,
        &["detect", "--ledger", "missing.json", "--leaked", "x.csv"]
    )
    .status
    .success());
    assert!(!corrfp(d, &["rr", "--keep", "0.2"]).status.success());
}
