//! Deterministic experiment runner.
//!
//! An [`ExperimentSpec`] describes a grid of cells; [`run`] executes a fixed
//! number of trials per cell in parallel and [`report::write`] stores the
//! per-trial and per-cell tables. Bundled specs reproduce the evaluation at
//! desk scale on the synthetic corpus; see [`bundled`].

pub mod report;
mod run;
mod spec;

pub use run::{run, share, trial_seed, CellResult, CellSummary, Results, TrialRecord, TrialTiming};
pub use spec::{
    CellParams, CorpusSource, Detector, ExperimentSpec, Scheme, SyntheticCorpus, DEFAULT_L,
};

use crate::{Error, Result};

/// Bundled experiment specs by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("table2", include_str!("specs/table2.toml")),
    ("fig5", include_str!("specs/fig5.toml")),
    ("table3", include_str!("specs/table3.toml")),
    ("fig6", include_str!("specs/fig6.toml")),
    ("table4", include_str!("specs/table4.toml")),
    ("fig7", include_str!("specs/fig7.toml")),
    ("table5", include_str!("specs/table5.toml")),
    ("fig8", include_str!("specs/fig8.toml")),
    ("table6", include_str!("specs/table6.toml")),
    ("fig9", include_str!("specs/fig9.toml")),
    ("rr-baseline", include_str!("specs/rr-baseline.toml")),
];

/// Parse the bundled spec called `name`.
pub fn bundled(name: &str) -> Result<ExperimentSpec> {
    let text = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Argument(format!("no bundled experiment named {name:?}")))?;
    ExperimentSpec::from_toml(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_spec_parses() {
        for (name, _) in BUNDLED {
            let spec = bundled(name).unwrap();
            assert_eq!(&spec.name, name);
            assert!(!spec.cells.is_empty());
        }
        assert!(bundled("nope").is_err());
    }
}
