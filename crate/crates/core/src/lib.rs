//! Multidata time-series causal feature selection.
//!
//! Pools sliding-window samples from an ensemble of aligned multivariate
//! time series, discovers per-target sets of time-lagged causal parents
//! (PC₁ / PCMCI with partial-correlation CI tests), and benchmarks the
//! selected features against lagged-correlation and random baselines with
//! a linear-regression harness and synthetic ground-truth systems.
//!
//! The numeric core is generic over the scalar type via [`Float`];
//! concrete `f64` aliases live at the crate root.

pub mod citest;
pub mod error;
pub mod float;
pub mod ingest;
pub mod linalg;
pub mod samples;
pub mod scale;
pub mod series;

pub use error::{Error, Result};
pub use float::Float;

/// f64 instantiations used throughout the CLI and most tests.
pub type Ensemble = series::EnsembleTimeSeries<f64>;
pub type Samples = samples::SampleMatrix<f64>;
pub type Scaler = scale::ScalerParams<f64>;
pub type CiOutcome = citest::CiResult<f64>;

pub mod discovery;
pub mod synth;

pub type Parents = discovery::ParentSet<f64>;
pub mod regress;

pub type Model = regress::LinearModel<f64>;
pub type Metrics = regress::MetricReport<f64>;
pub mod selection;
