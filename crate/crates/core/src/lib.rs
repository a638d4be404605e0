//! Multi-fidelity surrogate modeling and uncertainty quantification.
//!
//! The crate fuses cheap (low-fidelity) and expensive (high-fidelity) scalar
//! datasets and propagates input uncertainty through the fused surrogate:
//!
//! * [`dataset`]: sample storage, CSV ingestion, normalization, space-filling
//!   designs and input distributions.
//! * [`kernels`]: Gaussian, cubic and universal-cubic correlation functions with
//!   analytic first and second derivatives.
//! * [`kriging`] / [`cokriging`]: single- and two-fidelity Gaussian process
//!   interpolators fitted by concentrated maximum likelihood.
//! * [`adaptive`]: uncertainty/derivative based infill criteria and the
//!   sample-selection loop.
//! * [`mfdnn`]: a two-stage network: a frozen low-fidelity net feeding a
//!   correction net that predicts high-fidelity values.
//! * [`benchmarks`]: analytic multi-fidelity test functions and the
//!   MSE / R² harness.
//! * [`uq`]: Monte Carlo propagation, histograms and moments.

pub mod adaptive;
pub mod benchmarks;
pub mod cokriging;
pub mod dataset;
mod error;
pub mod kernels;
pub mod kriging;
pub mod linalg;
pub mod mfdnn;
pub mod optimize;
pub mod surrogate;
pub mod uq;

pub use error::{Error, Result};
