//! Experiment harness: configuration, replicated runs, and persisted results.

pub mod config;
pub mod output;
pub mod run;

pub use config::{Algorithm, EnvironmentConfig, ExperimentConfig, OutputConfig};
pub use output::{emit_csv, emit_json, emit_svg, read_csv, read_csv_file, read_summary, regret_series, Series};
pub use run::{run_experiment, ExperimentOutput, RoundRecord, RunSummary};

use std::path::PathBuf;

use crate::error::Result;

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct WrittenFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub svg: PathBuf,
}

/// Writes the CSV, JSON summary and regret plot named in `out`.
pub fn write_outputs(result: &ExperimentOutput, out: &OutputConfig) -> Result<WrittenFiles> {
    let files = WrittenFiles { csv: out.csv_path(), summary: out.summary_path(), svg: out.svg_path() };
    emit_csv(&result.records, &files.csv)?;
    emit_json(&result.summary, &files.summary)?;
    emit_svg(&regret_series(&result.summary), &files.svg)?;
    Ok(files)
}
