//! Multivariate Gaussian with dense SPD covariance.
//!
//! score s(x) = -Sigma^{-1} (x - mu); solves go through a cached Cholesky
//! factor Sigma = L L'.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_dim, ScoreModel};
use crate::numeric::std_normal_cdf;
use crate::sample::SampleSet;

const LN_2PI: f64 = 1.837877066409345483560659472811;

/// Gaussian parameters as they appear in model JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl GaussianSpec {
    /// Convenience constructor for an isotropic Gaussian.
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Self {
        let d = mean.len();
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { variance } else { 0.0 }).collect())
            .collect();
        GaussianSpec { mean, cov }
    }

    /// Validates the parameters; the covariance must be symmetric positive
    /// definite (checked by attempting a Cholesky factorization).
    pub fn build(&self) -> Result<GaussianModel> {
        let d = self.mean.len();
        if d == 0 {
            return Err(Error::InvalidInput("gaussian mean must be nonempty".into()));
        }
        if self.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("gaussian mean must be finite".into()));
        }
        if self.cov.len() != d || self.cov.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidInput(format!(
                "gaussian covariance must be {d} x {d}"
            )));
        }
        let mut m = DMatrix::zeros(d, d);
        let mut scale: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let v = self.cov[i][j];
                if !v.is_finite() {
                    return Err(Error::InvalidInput(
                        "gaussian covariance must be finite".into(),
                    ));
                }
                m[(i, j)] = v;
                scale = scale.max(v.abs());
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::InvalidInput(
                        "gaussian covariance must be symmetric".into(),
                    ));
                }
            }
        }
        // Symmetrize exactly before factorizing.
        let m = (&m + m.transpose()) * 0.5;
        let chol = Cholesky::new(m).ok_or_else(|| {
            Error::InvalidInput("gaussian covariance is not positive definite".into())
        })?;
        let log_det_half: f64 = (0..d).map(|i| chol.l()[(i, i)].ln()).sum();
        let log_norm = -0.5 * d as f64 * LN_2PI - log_det_half;
        // trace(Sigma^{-1}) = ||L^{-1}||_F^2.
        let inv_l = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or_else(|| Error::Numeric("covariance factor is singular".into()))?;
        let jac_trace = -inv_l.iter().map(|v| v * v).sum::<f64>();
        Ok(GaussianModel {
            spec: self.clone(),
            mean: DVector::from_column_slice(&self.mean),
            chol,
            log_norm,
            jac_trace,
            label: format!("gaussian(d={d})"),
        })
    }
}

/// Validated Gaussian with a cached Cholesky factor.
#[derive(Clone)]
pub struct GaussianModel {
    spec: GaussianSpec,
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
    jac_trace: f64,
    label: String,
}

impl GaussianModel {
    pub fn spec(&self) -> &GaussianSpec {
        &self.spec
    }

    fn centered(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x) - &self.mean
    }
}

impl ScoreModel for GaussianModel {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x)?;
        let s = -self.chol.solve(&self.centered(x));
        Ok(s.as_slice().to_vec())
    }

    fn log_density_unnorm(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let diff = self.centered(x);
        Ok(-0.5 * diff.dot(&self.chol.solve(&diff)))
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density_unnorm(x)? + self.log_norm)
    }

    fn score_jacobian_trace(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(self.jac_trace)
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be positive".into()));
        }
        let d = self.dim();
        let l = self.chol.l();
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let x = &self.mean + &l * z;
            rows.push(x.as_slice().to_vec());
        }
        SampleSet::from_rows(&rows)
    }

    fn cdf_1d(&self, x: f64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::Unsupported(
                "univariate cdf on a multivariate gaussian".into(),
            ));
        }
        let sigma = self.chol.l()[(0, 0)];
        Ok(std_normal_cdf((x - self.mean[0]) / sigma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::central_fd_gradient;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    fn spec_2d() -> GaussianSpec {
        GaussianSpec {
            mean: vec![1.0, -2.0],
            cov: vec![vec![2.0, 0.6], vec![0.6, 1.0]],
        }
    }

    #[test]
    fn standard_normal_hand_values() {
        let m = GaussianSpec::isotropic(vec![0.0], 1.0).build().unwrap();
        // s(x) = -x and log density = -x^2/2 - log sqrt(2 pi).
        assert_eq!(m.score(&[1.5]).unwrap(), vec![-1.5]);
        assert_relative_eq!(
            m.log_density(&[0.0]).unwrap(),
            -0.5 * LN_2PI,
            max_relative = 1e-14
        );
        assert_relative_eq!(m.cdf_1d(0.0).unwrap(), 0.5, epsilon = 1e-14);
        assert_eq!(m.score_jacobian_trace(&[0.3]).unwrap(), -1.0);
    }

    #[test]
    fn score_matches_fd_of_log_density() {
        let m = spec_2d().build().unwrap();
        let mut rng = substream(3, &[1]);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s = m.score(&x).unwrap();
            let fd = central_fd_gradient(|p| m.log_density_unnorm(p), &x, 1e-5).unwrap();
            for l in 0..2 {
                assert_relative_eq!(s[l], fd[l], epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn jacobian_trace_is_negative_trace_of_precision() {
        let m = spec_2d().build().unwrap();
        // Sigma = [[2, .6], [.6, 1]]; Sigma^{-1} = [[1, -.6], [-.6, 2]] / 1.64.
        let det = 2.0 * 1.0 - 0.6 * 0.6;
        let expected = -(1.0 + 2.0) / det;
        assert_relative_eq!(
            m.score_jacobian_trace(&[0.0, 0.0]).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn sampling_moments_and_determinism() {
        let m = spec_2d().build().unwrap();
        let s1 = m.sample(20_000, &mut substream(9, &[0])).unwrap();
        let s2 = m.sample(20_000, &mut substream(9, &[0])).unwrap();
        assert_eq!(s1, s2);
        let n = s1.n() as f64;
        for l in 0..2 {
            let mean = (0..s1.n()).map(|i| s1.row(i)[l]).sum::<f64>() / n;
            // 4 standard errors of the sample mean.
            let sd = [2.0f64, 1.0][l].sqrt();
            assert!(
                (mean - m.spec().mean[l]).abs() < 4.0 * sd / n.sqrt(),
                "moment mismatch in coordinate {l}: {mean}"
            );
        }
    }

    #[test]
    fn rejects_invalid_covariance() {
        let asym = GaussianSpec {
            mean: vec![0.0, 0.0],
            cov: vec![vec![1.0, 0.5], vec![-0.5, 1.0]],
        };
        assert!(asym.build().is_err());
        let indef = GaussianSpec {
            mean: vec![0.0, 0.0],
            cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        };
        assert!(indef.build().is_err());
        let ragged = GaussianSpec { mean: vec![0.0, 0.0], cov: vec![vec![1.0, 0.0]] };
        assert!(ragged.build().is_err());
    }

    #[test]
    fn dimension_mismatch_reported() {
        let m = spec_2d().build().unwrap();
        assert!(matches!(
            m.score(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }
}
