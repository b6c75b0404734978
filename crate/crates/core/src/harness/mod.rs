//! Experiment orchestration: configs, sweeps, series, checks, fits and bundles.

pub mod bundle;
pub mod checks;
pub mod config;
pub mod experiment;
pub mod fit;
pub mod series;

pub use bundle::{load_bundle, recheck, write_bundle, Summary};
pub use checks::{check_gronwall_chain, lower_bound_indicator, CheckContext, CheckEntry};
pub use config::{ExperimentConfig, GridConfig, Route};
pub use experiment::{run_cells, run_single_cell, CellOutcome, CellResult};
pub use fit::{fit_decay, DecayFit, SeriesField};
pub use series::{PerturbationSeries, SeriesRow};

use std::path::Path;

use crate::error::Result;

/// Runs every cell of `cfg` and writes the bundle to `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Summary> {
    let cells = run_cells(cfg, threads)?;
    write_bundle(cfg, &cells, Path::new(&cfg.output_dir))
}
