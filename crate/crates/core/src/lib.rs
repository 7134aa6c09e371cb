//! Polyspectral means of stationary time series.
//!
//! A polyspectral mean is the integral of a `k`-th order polyspectrum
//! against a weight function on the torus `[-π, π]^k`. This crate estimates
//! such means from higher-order periodograms, computes their asymptotic
//! covariance, and builds the bispectral linearity test on top of them.

pub mod asymvar;
pub mod error;
pub mod features;
pub mod lintest;
pub mod models;
pub mod partitions;
pub mod polymean;
pub mod polyproc;
pub mod series;
pub mod simlab;
pub mod weights;

pub use asymvar::{cov_matrix, variance, CovMatrix, SpectraSource, VarianceRequest};
pub use error::{Error, Result};
pub use lintest::{blt_statistic, weighted_chisq_pvalue, LinTestConfig, LinTestResult, PValueMethod};
pub use models::{parse_model, Innovation, LinearModel, ModelSpec};
pub use polymean::{estimate_mean, Estimator, EstimatorOptions, PolyMeanEstimate};
pub use series::{center, dft, TimeSeries};
pub use weights::{parse_weight, WeightFunction};
