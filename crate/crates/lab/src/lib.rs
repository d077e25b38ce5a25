//! File formats, experiment runners and the `brelu` command line built on
//! [`brelu_core`].

#![forbid(unsafe_code)]

pub mod checkpoint;
pub mod cli;
mod error;
pub mod experiments;
pub mod figure;
pub mod io;
pub mod report;

pub use error::{LabError, Result};
pub use experiments::{
    run_classification, run_comparison, run_sensitivity, AlphaSetting, DataSource,
    ExperimentConfig, Normalization,
};
pub use figure::{emit_paths_figure, PathsFigure, PathsSpec};
pub use report::{ExperimentReport, Rows};
