//! Gaussian mixture with isotropic components.
//!
//! Density p(x) = sum_k w_k N(x; mu_k, sigma_k^2 I). The score is the
//! responsibility-weighted average of component scores,
//!   s(x) = sum_k r_k(x) (mu_k - x) / sigma_k^2,
//! with responsibilities computed in log space.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::squared_distance;
use crate::model::{check_dim, ScoreModel};
use crate::numeric::{logsumexp, std_normal_cdf};
use crate::sample::SampleSet;

const LN_2PI: f64 = 1.837877066409345483560659472811;

/// Component means: scalars for univariate mixtures, or one vector per
/// component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GmmMeans {
    Scalars(Vec<f64>),
    Vectors(Vec<Vec<f64>>),
}

impl GmmMeans {
    fn to_vectors(&self) -> Vec<Vec<f64>> {
        match self {
            GmmMeans::Scalars(v) => v.iter().map(|&m| vec![m]).collect(),
            GmmMeans::Vectors(v) => v.clone(),
        }
    }
}

/// Component variance: one shared value, or one value per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GmmVariance {
    Shared(f64),
    PerComponent(Vec<f64>),
}

impl GmmVariance {
    fn to_per_component(&self, k: usize) -> Vec<f64> {
        match self {
            GmmVariance::Shared(v) => vec![*v; k],
            GmmVariance::PerComponent(v) => v.clone(),
        }
    }
}

/// Mixture parameters as they appear in model JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmSpec {
    pub weights: Vec<f64>,
    pub means: GmmMeans,
    pub variance: GmmVariance,
}

impl GmmSpec {
    /// Univariate mixture with shared variance.
    pub fn univariate(weights: Vec<f64>, means: Vec<f64>, variance: f64) -> Self {
        GmmSpec {
            weights,
            means: GmmMeans::Scalars(means),
            variance: GmmVariance::Shared(variance),
        }
    }

    pub fn build(&self) -> Result<GmmModel> {
        let k = self.weights.len();
        if k == 0 {
            return Err(Error::InvalidInput("gmm needs at least one component".into()));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidInput("gmm weights must be positive".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "gmm weights must sum to 1 within 1e-12, got {total}"
            )));
        }
        let means = self.means.to_vectors();
        if means.len() != k {
            return Err(Error::InvalidInput(format!(
                "gmm has {k} weights but {} means",
                means.len()
            )));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::InvalidInput("gmm means must be nonempty".into()));
        }
        for m in &means {
            if m.len() != d {
                return Err(Error::InvalidInput(
                    "gmm means must share one dimension".into(),
                ));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("gmm means must be finite".into()));
            }
        }
        let variances = self.variance.to_per_component(k);
        if variances.len() != k {
            return Err(Error::InvalidInput(format!(
                "gmm has {k} weights but {} variances",
                variances.len()
            )));
        }
        if variances.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidInput("gmm variances must be positive".into()));
        }
        Ok(GmmModel {
            spec: self.clone(),
            log_weights: self.weights.iter().map(|w| w.ln()).collect(),
            weights: self.weights.clone(),
            means,
            variances,
            label: format!("gmm(k={k},d={d})"),
        })
    }
}

/// Validated isotropic Gaussian mixture.
#[derive(Clone)]
pub struct GmmModel {
    spec: GmmSpec,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<f64>,
    label: String,
}

impl GmmModel {
    pub fn spec(&self) -> &GmmSpec {
        &self.spec
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    /// Per-component joint log densities log(w_k N(x; mu_k, sigma_k^2 I)),
    /// plus their logsumexp (the normalized log density). Errors when every
    /// term underflows to -inf, which would otherwise poison the score with
    /// NaN.
    fn log_terms(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let d = x.len() as f64;
        let terms: Vec<f64> = (0..self.components())
            .map(|k| {
                let v = self.variances[k];
                self.log_weights[k]
                    - 0.5 * d * (LN_2PI + v.ln())
                    - squared_distance(x, &self.means[k]) / (2.0 * v)
            })
            .collect();
        let lse = logsumexp(&terms);
        if lse == f64::NEG_INFINITY {
            return Err(Error::Underflow(
                "all mixture responsibilities underflowed".into(),
            ));
        }
        Ok((terms, lse))
    }

    fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (terms, lse) = self.log_terms(x)?;
        Ok(terms.iter().map(|t| (t - lse).exp()).collect())
    }
}

impl ScoreModel for GmmModel {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x)?;
        let r = self.responsibilities(x)?;
        let mut s = vec![0.0; x.len()];
        for ((rk, &v), mu) in r.iter().zip(&self.variances).zip(&self.means) {
            for l in 0..x.len() {
                s[l] += rk * (mu[l] - x[l]) / v;
            }
        }
        Ok(s)
    }

    fn log_density_unnorm(&self, x: &[f64]) -> Result<f64> {
        self.log_density(x)
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(self.log_terms(x)?.1)
    }

    /// trace(grad s) = sum_k r_k ||s_k||^2 - ||s||^2 - d sum_k r_k / sigma_k^2
    /// with component scores s_k = (mu_k - x) / sigma_k^2.
    fn score_jacobian_trace(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let r = self.responsibilities(x)?;
        let d = x.len() as f64;
        let mut s = vec![0.0; x.len()];
        let mut trace = 0.0;
        for ((rk, &v), mu) in r.iter().zip(&self.variances).zip(&self.means) {
            let mut sk_norm2 = 0.0;
            for l in 0..x.len() {
                let sk = (mu[l] - x[l]) / v;
                sk_norm2 += sk * sk;
                s[l] += rk * sk;
            }
            trace += rk * (sk_norm2 - d / v);
        }
        trace -= s.iter().map(|v| v * v).sum::<f64>();
        Ok(trace)
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be positive".into()));
        }
        let d = self.dim();
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = self.components() - 1;
            for (i, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = i;
                    break;
                }
            }
            let sd = self.variances[k].sqrt();
            let row: Vec<f64> = (0..d)
                .map(|l| self.means[k][l] + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            rows.push(row);
        }
        SampleSet::from_rows(&rows)
    }

    fn cdf_1d(&self, x: f64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::Unsupported(
                "univariate cdf on a multivariate mixture".into(),
            ));
        }
        Ok((0..self.components())
            .map(|k| {
                self.weights[k] * std_normal_cdf((x - self.means[k][0]) / self.variances[k].sqrt())
            })
            .sum())
    }
}
