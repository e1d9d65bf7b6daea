//! Gaussian-Bernoulli restricted Boltzmann machine with +/-1 hidden units.
//!
//! Joint density over visible x in R^d and hidden h in {-1, +1}^{d'}:
//!   f(x, h) = exp(x' B h + b' x + c' h - ||x||^2 / 2)
//! Marginalizing h factorizes across hidden units:
//!   f(x) = exp(b' x - ||x||^2 / 2) prod_l 2 cosh((B' x + c)_l)
//! so the score is closed-form for any hidden dimension:
//!   s(x) = b - x + B tanh(B' x + c)
//! The normalizer requires summing over all 2^{d'} hidden states,
//!   Z = (2 pi)^{d/2} sum_h exp(||B h + b||^2 / 2 + c' h),
//! which this module enumerates exactly for d' <= 20 (Gray-code order, one
//! column update per state). Larger hidden layers must estimate log Z with
//! annealed importance sampling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_dim, ScoreModel};
use crate::numeric::ln_2cosh;
use crate::sample::SampleSet;

const LN_2PI: f64 = 1.837877066409345483560659472811;

/// Hidden-state enumeration is capped at 2^20 configurations.
pub const EXACT_ENUMERATION_MAX_HIDDEN: usize = 20;

/// RBM parameters as they appear in model JSON: the d x d' coupling `B`,
/// visible bias `b`, hidden bias `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbRbmSpec {
    #[serde(rename = "B")]
    pub coupling: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl GbRbmSpec {
    pub fn build(&self) -> Result<GbRbmModel> {
        let d = self.b.len();
        let dp = self.c.len();
        if d == 0 || dp == 0 {
            return Err(Error::InvalidInput(
                "gbrbm needs at least one visible and one hidden unit".into(),
            ));
        }
        if self.coupling.len() != d || self.coupling.iter().any(|row| row.len() != dp) {
            return Err(Error::InvalidInput(format!(
                "gbrbm coupling must be {d} x {dp}"
            )));
        }
        let all = self
            .coupling
            .iter()
            .flatten()
            .chain(self.b.iter())
            .chain(self.c.iter());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("gbrbm parameters must be finite".into()));
        }
        let coupling = DMatrix::from_fn(d, dp, |i, j| self.coupling[i][j]);
        let col_sq_norms = (0..dp)
            .map(|j| coupling.column(j).iter().map(|v| v * v).sum())
            .collect();
        let mut model = GbRbmModel {
            spec: self.clone(),
            coupling,
            b: DVector::from_column_slice(&self.b),
            c: DVector::from_column_slice(&self.c),
            col_sq_norms,
            log_z: None,
            label: format!("gbrbm(d={d},h={dp})"),
        };
        if dp <= EXACT_ENUMERATION_MAX_HIDDEN {
            model.log_z = Some(model.enumerate_log_z());
        }
        Ok(model)
    }
}

/// Validated RBM; `log_z` is precomputed by enumeration when d' <= 20.
#[derive(Clone)]
pub struct GbRbmModel {
    spec: GbRbmSpec,
    coupling: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    col_sq_norms: Vec<f64>,
    log_z: Option<f64>,
    label: String,
}

impl GbRbmModel {
    pub fn spec(&self) -> &GbRbmSpec {
        &self.spec
    }

    pub fn hidden_dim(&self) -> usize {
        self.c.len()
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn visible_bias(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn hidden_bias(&self) -> &DVector<f64> {
        &self.c
    }

    /// Hidden activation B' x + c.
    pub fn hidden_field(&self, x: &[f64]) -> DVector<f64> {
        self.coupling.tr_mul(&DVector::from_column_slice(x)) + &self.c
    }

    fn capacity_error(&self) -> Error {
        Error::Capacity(format!(
            "hidden dimension {} exceeds the exact enumeration cap of {}; \
             estimate log Z with annealed importance sampling instead",
            self.hidden_dim(),
            EXACT_ENUMERATION_MAX_HIDDEN
        ))
    }

    /// Visits every hidden state in Gray-code order. The callback receives
    /// (v, ch) where v = B h + b and ch = c' h; consecutive states differ in
    /// one unit, so each step costs one column update.
    fn visit_hidden_states<F: FnMut(&DVector<f64>, f64)>(&self, mut visit: F) {
        let dp = self.hidden_dim();
        debug_assert!(dp <= EXACT_ENUMERATION_MAX_HIDDEN);
        let mut h = vec![-1.0f64; dp];
        let mut v = self.b.clone();
        let mut ch = 0.0;
        for l in 0..dp {
            v -= self.coupling.column(l);
            ch -= self.c[l];
        }
        visit(&v, ch);
        for i in 1usize..(1 << dp) {
            let l = i.trailing_zeros() as usize;
            h[l] = -h[l];
            let step = 2.0 * h[l];
            v += self.coupling.column(l) * step;
            ch += step * self.c[l];
            visit(&v, ch);
        }
    }

    /// log Z by exact enumeration; only called when d' <= 20.
    fn enumerate_log_z(&self) -> f64 {
        let d = self.dim() as f64;
        // Streaming logsumexp with a running maximum.
        let mut max = f64::NEG_INFINITY;
        let mut acc = 0.0f64;
        self.visit_hidden_states(|v, ch| {
            let t = 0.5 * v.norm_squared() + ch;
            if t > max {
                acc = acc * (max - t).exp() + 1.0;
                max = t;
            } else {
                acc += (t - max).exp();
            }
        });
        0.5 * d * LN_2PI + max + acc.ln()
    }

    /// Normalized hidden-state probabilities in Gray-code order, as
    /// (cumulative weights, total). Draws map a uniform through the
    /// cumulative table; the Gray index recovers h.
    fn hidden_cumulative(&self) -> (Vec<f64>, f64) {
        let mut logw = Vec::with_capacity(1 << self.hidden_dim());
        self.visit_hidden_states(|v, ch| logw.push(0.5 * v.norm_squared() + ch));
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        let cum: Vec<f64> = logw
            .iter()
            .map(|t| {
                acc += (t - max).exp();
                acc
            })
            .collect();
        (cum, acc)
    }

    fn hidden_state_for_gray_index(&self, i: usize) -> DVector<f64> {
        let bits = i ^ (i >> 1);
        DVector::from_fn(self.hidden_dim(), |l, _| {
            if bits >> l & 1 == 1 {
                1.0
            } else {
                -1.0
            }
        })
    }

    /// Exact log density; requires the enumerated normalizer (d' <= 20).
    pub fn log_density_exact(&self, x: &[f64]) -> Result<f64> {
        let log_z = self.log_z.ok_or_else(|| self.capacity_error())?;
        Ok(self.log_density_unnorm(x)? - log_z)
    }

    /// Enumerated log normalizer (d' <= 20).
    pub fn exact_log_z(&self) -> Result<f64> {
        self.log_z.ok_or_else(|| self.capacity_error())
    }

    /// Exact mean E[x] = B E[h] + b via hidden enumeration (d' <= 20).
    pub fn exact_mean(&self) -> Result<DVector<f64>> {
        if self.hidden_dim() > EXACT_ENUMERATION_MAX_HIDDEN {
            return Err(self.capacity_error());
        }
        let mut logw = Vec::with_capacity(1 << self.hidden_dim());
        self.visit_hidden_states(|v, ch| logw.push(0.5 * v.norm_squared() + ch));
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        let mut mean = DVector::zeros(self.dim());
        let mut idx = 0usize;
        self.visit_hidden_states(|v, _| {
            let w = (logw[idx] - max).exp();
            total += w;
            mean += v * w;
            idx += 1;
        });
        Ok(mean / total)
    }

    /// Exact covariance Cov[x] = I + B Cov[h] B' via hidden enumeration.
    pub fn exact_covariance(&self) -> Result<DMatrix<f64>> {
        if self.hidden_dim() > EXACT_ENUMERATION_MAX_HIDDEN {
            return Err(self.capacity_error());
        }
        let mut logw = Vec::with_capacity(1 << self.hidden_dim());
        self.visit_hidden_states(|v, ch| logw.push(0.5 * v.norm_squared() + ch));
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logw.iter().map(|t| (t - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let dp = self.hidden_dim();
        let mut eh = DVector::zeros(dp);
        let mut ehh = DMatrix::zeros(dp, dp);
        for (i, w) in weights.iter().enumerate() {
            let h = self.hidden_state_for_gray_index(i);
            eh += &h * *w;
            ehh += &h * h.transpose() * *w;
        }
        eh /= total;
        ehh /= total;
        let cov_h = ehh - &eh * eh.transpose();
        Ok(DMatrix::identity(self.dim(), self.dim())
            + &self.coupling * cov_h * self.coupling.transpose())
    }
}

impl ScoreModel for GbRbmModel {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x)?;
        let phi = self.hidden_field(x);
        let tanh = phi.map(f64::tanh);
        let s = &self.b - DVector::from_column_slice(x) + &self.coupling * tanh;
        Ok(s.as_slice().to_vec())
    }

    /// log f(x) = b' x - ||x||^2 / 2 + sum_l ln 2 cosh((B' x + c)_l); exact
    /// for any hidden dimension because h marginalizes in closed form.
    fn log_density_unnorm(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let xv = DVector::from_column_slice(x);
        let phi = self.hidden_field(x);
        Ok(self.b.dot(&xv) - 0.5 * xv.norm_squared() + phi.iter().map(|&t| ln_2cosh(t)).sum::<f64>())
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.log_density_exact(x)
    }

    /// trace(grad s) = -d + sum_l sech^2((B' x + c)_l) ||B_col_l||^2.
    fn score_jacobian_trace(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let phi = self.hidden_field(x);
        let mut trace = -(self.dim() as f64);
        for l in 0..self.hidden_dim() {
            let sech = 1.0 / phi[l].cosh();
            trace += sech * sech * self.col_sq_norms[l];
        }
        Ok(trace)
    }

    /// Exact sampler: enumerate p(h) (d' <= 20), then x | h ~ N(B h + b, I).
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be positive".into()));
        }
        if self.hidden_dim() > EXACT_ENUMERATION_MAX_HIDDEN {
            return Err(self.capacity_error());
        }
        let (cum, total) = self.hidden_cumulative();
        let d = self.dim();
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * total;
            let idx = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
            let h = self.hidden_state_for_gray_index(idx);
            let mean = &self.coupling * h + &self.b;
            let row: Vec<f64> = (0..d)
                .map(|l| mean[l] + rng.sample::<f64, _>(StandardNormal))
                .collect();
            rows.push(row);
        }
        SampleSet::from_rows(&rows)
    }
}
