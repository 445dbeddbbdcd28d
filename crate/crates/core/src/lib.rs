//! Monte-Carlo toolkit for isotropic log-concave measures: samplers,
//! transport metrics, moment and tensor identities, and a particle
//! implementation of stochastic localization.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod distributions;
pub mod error;
pub mod linalg;
pub mod localization;
pub mod metrics;
pub mod moments;
pub mod rng;
pub mod stats;
pub mod tensorcheck;

pub use distributions::{make_distribution, sample, DistributionSpec, Family, SampleMatrix};
pub use error::{Error, Result};
pub use stats::Estimate;
