//! Experiment driver: the simulation grid, the repeated cross-validation
//! protocol for real data, and result summaries.

mod config;
mod grid;
mod realdata;
mod records;
mod summary;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

pub use config::{BaseTuningMode, ExperimentConfig, Mode};
pub use grid::{
    conditions, run_simulation_grid, run_simulation_grid_observed, simulation_config, task_seed, Condition,
    FitObserver, SIMULATION_METRICS,
};
pub use realdata::run_repeated_cv;
pub use records::{read_records, sort_records, write_records, ResultRecord, RESULT_HEADER};
pub use summary::{summarize, summarize_records, SummaryRow};

#[derive(Serialize)]
struct RunMetadata<'a> {
    tool_version: &'a str,
    base_tuning: BaseTuningMode,
    config: &'a ExperimentConfig,
}

/// Path of the metadata file written next to a result CSV.
pub fn metadata_path(results: &Path) -> PathBuf {
    let mut name = results.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes the result CSV and, next to it, a JSON file with the run's
/// configuration.
pub fn write_results(path: &Path, records: &[ResultRecord], cfg: &ExperimentConfig) -> Result<()> {
    write_records(records, BufWriter::new(File::create(path)?))?;
    let meta = RunMetadata { tool_version: env!("CARGO_PKG_VERSION"), base_tuning: cfg.base_tuning, config: cfg };
    std::fs::write(metadata_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}
