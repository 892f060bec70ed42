//! Batch experiments: sweeps and optimum searches written as CSV, plus SVG
//! plots of those files.
//!
//! Internal rates are in nats; everything written to disk is in bits per
//! channel use per receive antenna, converted by [`nats_to_bits`] only.

use std::path::PathBuf;

use thiserror::Error;

mod plot;
mod run;
mod spec;
mod table;

pub use plot::{emit_plot, PlotKind};
pub use run::{run_optimum, run_sweep, RunOutcome, OPTIMUM_SCHEMA, SWEEP_SCHEMA};
pub use spec::{
    ExperimentSpec, McSection, MethodsSection, OptimizeSection, OutputSection, PathLossSection,
    SweepKind, SweepSection, SystemSection, PRESET_NAMES,
};
pub use table::CsvTable;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{origin}: {message}")]
    Config { origin: String, message: String },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Model(#[from] crate::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: malformed CSV: {message}")]
    MalformedCsv { origin: String, message: String },
    #[error("{origin}: no data to plot")]
    EmptyData { origin: String },
}

impl ExperimentError {
    /// Process exit status: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Model(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.into(),
            source,
        }
    }
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
