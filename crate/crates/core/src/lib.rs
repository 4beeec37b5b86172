//! Inter-subject correlation analysis of naturalistic neural responses
//! against friendship-network centrality.
//!
//! * [`graphnet`]: nomination graph, in-degree, median split, dyad categories,
//!   social distance.
//! * [`isc`]: run alignment, Pearson ISC tables, Fisher z, within-region
//!   standardization, subject means.
//! * [`stats`]: standardized OLS, Spearman, Benjamini-Hochberg, crossed
//!   random-intercept mixed models on role-doubled dyads, planned contrasts,
//!   per-region sweeps.
//! * [`behav`]: rating and demographic similarity.
//! * [`synth`]: planted synthetic data and its analytic expectations.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiations.

pub mod behav;
pub mod dyad;
pub mod error;
pub mod graphnet;
pub mod isc;
pub mod linalg;
pub mod scalar;
pub mod stats;
pub mod synth;

pub use dyad::{all_dyads, pair_count, Dyad};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type TimeSeriesPanel = isc::TimeSeriesPanel<f64>;
pub type TimeSeriesPanelF32 = isc::TimeSeriesPanel<f32>;
pub type IscTable = isc::IscTable<f64>;
pub type IscTableF32 = isc::IscTable<f32>;
pub type SubjectMeans = isc::SubjectMeans<f64>;
pub type Frame = stats::design::Frame<f64>;
pub type LmmFit = stats::lmm::LmmFit<f64>;
pub type OlsFit = stats::ols::OlsFit<f64>;
pub type RegionStats = stats::RegionStats<f64>;
pub type SimilarityColumn = behav::SimilarityColumn<f64>;
pub type Matrix = linalg::Matrix<f64>;
