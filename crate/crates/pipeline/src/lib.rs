//! File-based driver for the centrality and neural-similarity analyses:
//! configuration, CSV/JSON I/O, the per-stage analyses, synthetic studies and
//! a built-in validation suite.

pub mod analysis;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod synth;
pub mod validate;

pub use config::{AnalysisConfig, CovariateSet};
pub use error::{PipelineError, Result};
pub use synth::{SynthOptions, Synthetic};
