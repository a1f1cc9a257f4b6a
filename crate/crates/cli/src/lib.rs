//! Verification front end: reads a run configuration, evaluates the kernels
//! of `conifold-core` over grids and writes JSON reports and CSV tables.

mod commands;
pub mod config;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub use config::RunConfig;
pub use report::{Check, ReportDocument, Summary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_FAIL: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Profile,
    Cutoff,
    Positivity,
    Curvature,
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Profile => "profile",
            Self::Cutoff => "cutoff",
            Self::Positivity => "positivity",
            Self::Curvature => "curvature",
            Self::Report => "report",
        }
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip an `f64`.
pub(crate) fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs `command`, writes `<out_dir>/<command>.json` plus any tables, and
/// returns the report. `inputs` adds reports to merge for [`Command::Report`].
pub fn run(command: Command, config: &RunConfig, inputs: &[PathBuf]) -> Result<ReportDocument, CliError> {
    config.validate()?;
    let out = &config.out_dir;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let start = Instant::now();
    let mut doc = match command {
        Command::Profile => commands::profile::run(config)?,
        Command::Cutoff => commands::cutoff::run(config)?,
        Command::Positivity => commands::positivity::run(config)?,
        Command::Curvature => commands::curvature::run(config)?,
        Command::Report => commands::merge::run(config, inputs)?,
    };
    if config.timings {
        doc.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    doc.write(&out.join(format!("{}.json", command.name())))?;
    Ok(doc)
}

/// The configuration as echoed in reports. `jobs` is left out: results do
/// not depend on the number of workers.
pub(crate) fn config_echo(config: &RunConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
    if let Some(map) = v.as_object_mut() {
        map.remove("jobs");
    }
    v
}
