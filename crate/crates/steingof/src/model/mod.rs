//! Model zoo: declarative specs and validated runtime models.
//!
//! A spec ([`ModelSpec`]) is the JSON-facing parameterization; building it
//! yields a runtime model with cached factorizations. Runtime models expose
//! the score `s(x) = grad log density(x)` plus optional capabilities
//! (normalized log density, exact sampling, closed-form score Jacobian
//! trace, a univariate CDF). Absent capabilities surface as
//! `Error::Unsupported` so callers can fall back or refuse.

mod gaussian;
mod gbrbm;
mod gmm;
mod perturb;

pub use gaussian::{GaussianModel, GaussianSpec};
pub use gbrbm::{GbRbmModel, GbRbmSpec, EXACT_ENUMERATION_MAX_HIDDEN};
pub use gmm::{GmmMeans, GmmModel, GmmSpec, GmmVariance};
pub use perturb::{perturb, PerturbTarget, PerturbationSpec};

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::SampleSet;

/// A density known through its score; everything else is optional.
pub trait ScoreModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Short human-readable identifier used in reports.
    fn label(&self) -> &str;

    /// Score s(x) = grad_x log density(x).
    fn score(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Log density up to an additive constant.
    fn log_density_unnorm(&self, x: &[f64]) -> Result<f64> {
        let _ = x;
        Err(Error::Unsupported("unnormalized log density".into()))
    }

    /// Normalized log density, when tractable.
    fn log_density(&self, x: &[f64]) -> Result<f64> {
        let _ = x;
        Err(Error::Unsupported("normalized log density".into()))
    }

    /// trace of the score Jacobian, when closed-form.
    fn score_jacobian_trace(&self, x: &[f64]) -> Result<f64> {
        let _ = x;
        Err(Error::Unsupported("score Jacobian trace".into()))
    }

    /// Draws n i.i.d. points, when exact sampling is available.
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
        let _ = (n, rng);
        Err(Error::Unsupported("exact sampling".into()))
    }

    /// Cumulative distribution function for univariate models.
    fn cdf_1d(&self, x: f64) -> Result<f64> {
        let _ = x;
        Err(Error::Unsupported("univariate cdf".into()))
    }
}

/// Declarative model parameterization; the JSON schema is
/// `{"type": "gaussian" | "gmm" | "gbrbm", ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelSpec {
    Gaussian(GaussianSpec),
    Gmm(GmmSpec),
    Gbrbm(GbRbmSpec),
}

impl ModelSpec {
    /// Validates the parameters and builds the runtime model.
    pub fn build(&self) -> Result<Model> {
        match self {
            ModelSpec::Gaussian(s) => Ok(Model::Gaussian(s.build()?)),
            ModelSpec::Gmm(s) => Ok(Model::Gmm(s.build()?)),
            ModelSpec::Gbrbm(s) => Ok(Model::Gbrbm(s.build()?)),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Validated runtime model.
#[derive(Clone)]
pub enum Model {
    Gaussian(GaussianModel),
    Gmm(GmmModel),
    Gbrbm(GbRbmModel),
}

impl Model {
    fn inner(&self) -> &dyn ScoreModel {
        match self {
            Model::Gaussian(m) => m,
            Model::Gmm(m) => m,
            Model::Gbrbm(m) => m,
        }
    }

    /// The spec this model was built from.
    pub fn spec(&self) -> ModelSpec {
        match self {
            Model::Gaussian(m) => ModelSpec::Gaussian(m.spec().clone()),
            Model::Gmm(m) => ModelSpec::Gmm(m.spec().clone()),
            Model::Gbrbm(m) => ModelSpec::Gbrbm(m.spec().clone()),
        }
    }

    pub fn as_gbrbm(&self) -> Option<&GbRbmModel> {
        match self {
            Model::Gbrbm(m) => Some(m),
            _ => None,
        }
    }
}

impl ScoreModel for Model {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn label(&self) -> &str {
        self.inner().label()
    }

    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner().score(x)
    }

    fn log_density_unnorm(&self, x: &[f64]) -> Result<f64> {
        self.inner().log_density_unnorm(x)
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.inner().log_density(x)
    }

    fn score_jacobian_trace(&self, x: &[f64]) -> Result<f64> {
        self.inner().score_jacobian_trace(x)
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
        self.inner().sample(n, rng)
    }

    fn cdf_1d(&self, x: f64) -> Result<f64> {
        self.inner().cdf_1d(x)
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}
