//! Configuration, presets, analysis pipeline and report emission behind the
//! `lgdelay` binary.

// `!(x > 0)` is used throughout to reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod presets;
pub mod report;

pub use config::{Analyses, RunConfig};
pub use error::CliError;
pub use pipeline::{run_pipeline, RunResults};
pub use report::{build_report, write_outputs, Report};
