//! Goodness-of-fit testing for unnormalized probability models.
//!
//! The engine measures departure from a hypothesized model `q` through the
//! kernelized Stein discrepancy: the score function `s_q = grad log q` is
//! combined with a reproducing-kernel family of test functions, so the
//! discrepancy can be estimated from a sample of the data distribution
//! without ever computing the normalizer of `q`. On top of the estimators sit
//! bootstrap, linear, and spectral hypothesis tests, two-sample and
//! likelihood baselines, and a benchmark harness for power studies.
//!
//! Modules:
//! - [`model`]: Gaussian, Gaussian mixture, and Gaussian-Bernoulli RBM
//!   models exposed through their scores, plus parameter perturbations.
//! - [`kernel`]: the RBF kernel with closed-form derivative bundles and the
//!   median-distance bandwidth heuristic.
//! - [`stein`]: the Stein kernel `u_q`, Gram assembly, and the U, V, and
//!   linear discrepancy estimators.
//! - [`htest`]: multinomial-bootstrap, asymptotic linear, and spectral tests.
//! - [`baselines`]: MMD two-sample tests, the exact likelihood-ratio oracle,
//!   blocked Gibbs sampling, annealed importance sampling, the univariate
//!   Kolmogorov-Smirnov test, and a Fisher-divergence diagnostic.
//! - [`bench`]: experiment configs, trial generation, and rate aggregation.
//! - [`sample`], [`report`], [`rng`], [`numeric`]: containers and utilities.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod htest;
pub mod kernel;
pub mod model;
pub mod numeric;
pub mod report;
pub mod rng;
pub mod sample;
pub mod stein;

pub use error::{Error, Result};
