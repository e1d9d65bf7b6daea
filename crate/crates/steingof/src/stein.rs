//! The Stein kernel u_q, its Gram matrix, and the KSD estimators.
//!
//! For a model with score s(x) = ∇_x log q(x) and a base kernel k,
//!
//!   u_q(x, y) = s(x)ᵀ s(y) k(x,y) + s(x)ᵀ ∇_y k(x,y)
//!             + ∇_x k(x,y)ᵀ s(y) + trace(∇_x ∇_y k(x,y)).
//!
//! u_q is itself a positive definite kernel, its double expectation under the
//! sampling distribution p is the kernelized Stein discrepancy S(p, q), and
//! S(p, q) = 0 iff p = q. None of this needs the normalizer of q, which is
//! what makes the discrepancy usable for unnormalized models.

use nalgebra::DMatrix;
use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::RbfKernel;
use crate::model::ScoreModel;
use crate::numeric::mean_and_variance;
use crate::sample::SampleSet;

/// Default memory cap for Gram construction (2 GiB, n ≈ 16k).
pub const DEFAULT_GRAM_CAP_BYTES: usize = 2 << 30;

/// Relative tolerance for negative Gram eigenvalues; anything below
/// -tol * max eigenvalue indicates a real positive-definiteness violation
/// rather than rounding noise.
const PSD_RTOL: f64 = 1e-8;

/// Applies the Stein operator of `model` to a test function at x:
/// (A f)(x) = s(x) f(x) + ∇f(x). `f` returns the pair (value, gradient).
pub fn stein_apply<F>(model: &dyn ScoreModel, f: F, x: &[f64]) -> Result<Vec<f64>>
where
    F: FnOnce(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let score = model.score(x)?;
    let (value, grad) = f(x)?;
    if grad.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: grad.len() });
    }
    Ok(score.iter().zip(&grad).map(|(s, g)| s * value + g).collect())
}

/// The Stein kernel with both scores already computed.
pub fn u_q_from_scores(
    kernel: &RbfKernel,
    x: &[f64],
    y: &[f64],
    score_x: &[f64],
    score_y: &[f64],
) -> f64 {
    let kd = kernel.eval_with_derivatives(x, y);
    let mut quad = 0.0;
    let mut sx_gy = 0.0;
    let mut gx_sy = 0.0;
    for l in 0..x.len() {
        quad += score_x[l] * score_y[l];
        sx_gy += score_x[l] * kd.grad_y[l];
        gx_sy += kd.grad_x[l] * score_y[l];
    }
    kd.value * quad + sx_gy + gx_sy + kd.cross_trace
}

/// The Stein kernel u_q(x, y); symmetric in its arguments.
pub fn u_q(model: &dyn ScoreModel, kernel: &RbfKernel, x: &[f64], y: &[f64]) -> Result<f64> {
    let sx = model.score(x)?;
    let sy = model.score(y)?;
    Ok(u_q_from_scores(kernel, x, y, &sx, &sy))
}

/// Monte Carlo KSD when both scores are known (diagnostic mode): the V-style
/// double average of δ(xᵢ)ᵀ k(xᵢ,xⱼ) δ(xⱼ) with δ = s_p − s_q, over a sample
/// from p. Nonnegative because k is positive definite.
pub fn ksd_two_score(
    model_p: &dyn ScoreModel,
    model_q: &dyn ScoreModel,
    kernel: &RbfKernel,
    sample: &SampleSet,
) -> Result<f64> {
    let n = sample.n();
    if n == 0 {
        return Err(Error::InvalidInput("two-score KSD needs a nonempty sample".into()));
    }
    let deltas: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let x = sample.row(i);
            let sp = model_p.score(x)?;
            let sq = model_q.score(x)?;
            Ok(sp.iter().zip(&sq).map(|(a, b)| a - b).collect())
        })
        .collect::<Result<_>>()?;
    let row_sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = sample.row(i);
            let di = &deltas[i];
            (0..n)
                .map(|j| {
                    let dot: f64 = di.iter().zip(&deltas[j]).map(|(a, b)| a * b).sum();
                    kernel.eval(xi, sample.row(j)) * dot
                })
                .sum()
        })
        .collect();
    Ok(row_sums.iter().sum::<f64>() / (n * n) as f64)
}

/// The n×n matrix of Stein-kernel values over a sample. Symmetric, finite,
/// and positive semidefinite up to rounding.
#[derive(Debug, Clone)]
pub struct SteinGram {
    matrix: Array2<f64>,
    model_label: String,
    bandwidth: f64,
}

impl SteinGram {
    /// Wraps an existing matrix, enforcing squareness, finiteness, and
    /// symmetry (within 1e-12, scaled); the stored matrix is exactly
    /// symmetrized.
    pub fn new(matrix: Array2<f64>, model_label: impl Into<String>, bandwidth: f64) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c || r == 0 {
            return Err(Error::InvalidInput(format!(
                "Stein Gram matrix must be square and nonempty, got {r}x{c}"
            )));
        }
        let mut matrix = matrix;
        for i in 0..r {
            for j in (i + 1)..r {
                let (a, b) = (matrix[[i, j]], matrix[[j, i]]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::Numeric(format!("non-finite Gram entry at ({i}, {j})")));
                }
                if (a - b).abs() > 1e-12 * 1f64.max(a.abs() + b.abs()) {
                    return Err(Error::Numeric(format!(
                        "Gram asymmetry at ({i}, {j}): {a} vs {b}"
                    )));
                }
                let m = 0.5 * (a + b);
                matrix[[i, j]] = m;
                matrix[[j, i]] = m;
            }
            if !matrix[[i, i]].is_finite() {
                return Err(Error::Numeric(format!("non-finite Gram entry at ({i}, {i})")));
            }
        }
        Ok(SteinGram { matrix, model_label: model_label.into(), bandwidth })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[[i, j]]
    }

    pub fn model_label(&self) -> &str {
        &self.model_label
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Mean of the diagonal, (1/n) Σᵢ u_q(xᵢ, xᵢ).
    pub fn diag_mean(&self) -> f64 {
        self.matrix.diag().sum() / self.n() as f64
    }
}

/// Builds the Stein Gram matrix with the default memory cap.
pub fn build_gram(model: &dyn ScoreModel, kernel: &RbfKernel, sample: &SampleSet) -> Result<SteinGram> {
    build_gram_with_cap(model, kernel, sample, DEFAULT_GRAM_CAP_BYTES)
}

/// Builds the Stein Gram matrix. Scores are computed once per point; the
/// upper triangle is computed in parallel and mirrored, so the result is
/// deterministic regardless of thread count.
pub fn build_gram_with_cap(
    model: &dyn ScoreModel,
    kernel: &RbfKernel,
    sample: &SampleSet,
    cap_bytes: usize,
) -> Result<SteinGram> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::InvalidInput("Gram construction needs at least 2 points".into()));
    }
    if sample.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: sample.dim() });
    }
    let bytes = n
        .checked_mul(n)
        .and_then(|e| e.checked_mul(std::mem::size_of::<f64>()))
        .ok_or_else(|| Error::Capacity("Gram size overflows".into()))?;
    if bytes > cap_bytes {
        return Err(Error::Capacity(format!(
            "Stein Gram for n = {n} needs {bytes} bytes (cap {cap_bytes}); \
             use the linear estimator for samples this large"
        )));
    }
    let scores = score_table(model, sample)?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = sample.row(i);
            (i..n)
                .map(|j| u_q_from_scores(kernel, xi, sample.row(j), &scores[i], &scores[j]))
                .collect()
        })
        .collect();
    let mut matrix = Array2::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        for (off, v) in row.iter().enumerate() {
            let j = i + off;
            matrix[[i, j]] = *v;
            matrix[[j, i]] = *v;
        }
    }
    Ok(SteinGram {
        matrix,
        model_label: model.label().to_string(),
        bandwidth: kernel.bandwidth(),
    })
}

/// Scores for every sample row, each validated finite.
pub(crate) fn score_table(model: &dyn ScoreModel, sample: &SampleSet) -> Result<Vec<Vec<f64>>> {
    (0..sample.n())
        .map(|i| {
            let s = model.score(sample.row(i))?;
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("score at sample row {i} is not finite")));
            }
            Ok(s)
        })
        .collect()
}

/// Which empirical functional of u_q an estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    UStatistic,
    VStatistic,
    Linear,
}

/// A point estimate of the KSD.
#[derive(Debug, Clone, PartialEq)]
pub struct KsdEstimate {
    pub value: f64,
    pub kind: EstimatorKind,
    pub n: usize,
    /// Unbiased sample variance of the per-pair terms; present only for the
    /// linear kind with at least two pairs.
    pub plugin_variance: Option<f64>,
}

/// The unbiased U-statistic: mean of the off-diagonal Gram entries.
pub fn u_statistic(gram: &SteinGram) -> Result<KsdEstimate> {
    let n = gram.n();
    if n < 2 {
        return Err(Error::InvalidInput("U-statistic needs at least 2 points".into()));
    }
    let total = gram.matrix.sum();
    let trace = gram.matrix.diag().sum();
    Ok(KsdEstimate {
        value: (total - trace) / (n * (n - 1)) as f64,
        kind: EstimatorKind::UStatistic,
        n,
        plugin_variance: None,
    })
}

/// The V-statistic: mean of all Gram entries. Biased upward but nonnegative,
/// because it is a quadratic form in a positive definite kernel.
pub fn v_statistic(gram: &SteinGram) -> KsdEstimate {
    let n = gram.n();
    KsdEstimate {
        value: gram.matrix.sum() / (n * n) as f64,
        kind: EstimatorKind::VStatistic,
        n,
        plugin_variance: None,
    }
}

/// The O(n) estimator: mean of u_q over ⌊n/2⌋ disjoint pairs taken in sample
/// order, (x₁,x₂), (x₃,x₄), …; a trailing odd point is ignored. The paired
/// terms are i.i.d., which is what gives this estimator a Gaussian null limit
/// instead of the degenerate one.
pub fn linear_statistic(
    model: &dyn ScoreModel,
    kernel: &RbfKernel,
    sample: &SampleSet,
) -> Result<KsdEstimate> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::InvalidInput("linear estimator needs at least 2 points".into()));
    }
    if sample.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: sample.dim() });
    }
    let terms: Vec<f64> = (0..n / 2)
        .map(|p| u_q(model, kernel, sample.row(2 * p), sample.row(2 * p + 1)))
        .collect::<Result<_>>()?;
    let (mean, variance) = mean_and_variance(&terms);
    Ok(KsdEstimate {
        value: mean,
        kind: EstimatorKind::Linear,
        n,
        plugin_variance: (terms.len() >= 2).then_some(variance),
    })
}

/// Estimated eigenvalues of the Stein-kernel integral operator, the weights
/// of the centered-χ² null limit of n·Ŝ_u.
#[derive(Debug, Clone)]
pub struct SpectralNull {
    /// Nonincreasing, nonnegative (negatives within tolerance clipped).
    pub eigenvalues: Vec<f64>,
    pub n: usize,
}

/// Eigenvalues of Gram/n, sorted nonincreasing. Negative values within
/// rounding tolerance are clipped to zero; larger violations are an error.
pub fn gram_eigenvalues(gram: &SteinGram) -> Result<SpectralNull> {
    let n = gram.n();
    if n < 2 {
        return Err(Error::InvalidInput("spectral null needs at least 2 points".into()));
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| gram.matrix[[i, j]] / n as f64);
    let eig = nalgebra::SymmetricEigen::try_new(scaled, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numeric("eigensolver did not converge".into()))?;
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_unstable_by(|a, b| b.total_cmp(a));
    let max = eigenvalues[0].max(0.0);
    let min = *eigenvalues.last().expect("n >= 2");
    if min < -PSD_RTOL * max {
        return Err(Error::Numeric(format!(
            "Gram violates positive semidefiniteness: eigenvalues span [{min}, {max}]"
        )));
    }
    for v in &mut eigenvalues {
        *v = v.max(0.0);
    }
    Ok(SpectralNull { eigenvalues, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::median_bandwidth;
    use crate::model::{GaussianSpec, GmmSpec, Model, ModelSpec};
    use crate::numeric::mean_and_variance;
    use crate::rng::substream;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;

    fn std_normal_1d() -> Model {
        ModelSpec::Gaussian(GaussianSpec::isotropic(vec![0.0], 1.0)).build().unwrap()
    }

    fn gmm_2() -> Model {
        ModelSpec::Gmm(GmmSpec::univariate(vec![0.4, 0.6], vec![-1.0, 1.5], 1.0))
            .build()
            .unwrap()
    }

    #[test]
    fn u_q_hand_values_standard_normal() {
        let q = std_normal_1d();
        let k = RbfKernel::new(1.0).unwrap();
        // x = y = 0: scores vanish, cross trace d/h² = 1.
        assert_abs_diff_eq!(u_q(&q, &k, &[0.0], &[0.0]).unwrap(), 1.0, epsilon = 1e-15);
        // x = 1, y = 0: the s(x)ᵀ∇_y k term is the only survivor, -e^{-1/2}.
        assert_abs_diff_eq!(
            u_q(&q, &k, &[1.0], &[0.0]).unwrap(),
            -(-0.5f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn u_q_symmetric_in_arguments() {
        let q = gmm_2();
        let k = RbfKernel::new(0.8).unwrap();
        let mut rng = substream(11, &[0]);
        for _ in 0..1000 {
            let x = [rng.random_range(-4.0..4.0)];
            let y = [rng.random_range(-4.0..4.0)];
            let a = u_q(&q, &k, &x, &y).unwrap();
            let b = u_q(&q, &k, &y, &x).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn u_q_matches_independent_assembly() {
        // Rebuild u_q from its four ingredients with finite-difference kernel
        // derivatives instead of the closed forms.
        let q = gmm_2();
        let k = RbfKernel::new(0.9).unwrap();
        let mut rng = substream(12, &[0]);
        for _ in 0..50 {
            let x = [rng.random_range(-3.0..3.0)];
            let y = [rng.random_range(-3.0..3.0)];
            let (sx, sy) = (q.score(&x).unwrap(), q.score(&y).unwrap());
            let e = 1e-5;
            let gx = (k.eval(&[x[0] + e], &y) - k.eval(&[x[0] - e], &y)) / (2.0 * e);
            let gy = (k.eval(&x, &[y[0] + e]) - k.eval(&x, &[y[0] - e])) / (2.0 * e);
            let cross = (k.eval(&[x[0] + e], &[y[0] + e]) - k.eval(&[x[0] + e], &[y[0] - e])
                - k.eval(&[x[0] - e], &[y[0] + e])
                + k.eval(&[x[0] - e], &[y[0] - e]))
                / (4.0 * e * e);
            let assembled = sx[0] * sy[0] * k.eval(&x, &y) + sx[0] * gy + gx * sy[0] + cross;
            assert_relative_eq!(u_q(&q, &k, &x, &y).unwrap(), assembled, max_relative = 1e-5, epsilon = 1e-7);
        }
    }

    #[test]
    fn stein_apply_forms() {
        let q = std_normal_1d();
        // f ≡ 1 returns the score itself.
        let a = stein_apply(&q, |_| Ok((1.0, vec![0.0])), &[2.0]).unwrap();
        assert_eq!(a, q.score(&[2.0]).unwrap());
        // f(x) = x gives -x² + 1 for the standard normal.
        let a = stein_apply(&q, |x| Ok((x[0], vec![1.0])), &[2.0]).unwrap();
        assert_abs_diff_eq!(a[0], -3.0, epsilon = 1e-15);
    }

    #[test]
    fn stein_apply_slice_assembles_u_q() {
        // With f = k(·, y), u_q(x, y) = (A f)(x)ᵀ s(y) + s(x)ᵀ∇_y k + cross.
        let q = gmm_2();
        let k = RbfKernel::new(1.1).unwrap();
        let (x, y) = ([0.7], [-0.4]);
        let kd = k.eval_with_derivatives(&x, &y);
        let af = stein_apply(
            &q,
            |x| Ok((k.eval(x, &y), k.eval_with_derivatives(x, &y).grad_x)),
            &x,
        )
        .unwrap();
        let sy = q.score(&y).unwrap();
        let sx = q.score(&x).unwrap();
        let assembled = af[0] * sy[0] + sx[0] * kd.grad_y[0] + kd.cross_trace;
        assert_abs_diff_eq!(u_q(&q, &k, &x, &y).unwrap(), assembled, epsilon = 1e-12);
    }

    #[test]
    fn u_q_one_sided_expectation_vanishes() {
        // E_{x~q}[u_q(x, y)] = 0 for fixed y by Stein's identity.
        let q = std_normal_1d();
        let k = RbfKernel::new(1.0).unwrap();
        let sample = q.sample(20_000, &mut substream(13, &[0])).unwrap();
        let vals: Vec<f64> = (0..sample.n())
            .map(|i| u_q(&q, &k, sample.row(i), &[0.6]).unwrap())
            .collect();
        let (mean, var) = mean_and_variance(&vals);
        let stderr = (var / vals.len() as f64).sqrt();
        assert!(mean.abs() < 4.0 * stderr, "mean {mean} vs stderr {stderr}");
    }

    #[test]
    fn gram_matches_pointwise_and_is_symmetric() {
        let q = gmm_2();
        let sample = q.sample(20, &mut substream(14, &[0])).unwrap();
        let k = RbfKernel::new(median_bandwidth(&sample).unwrap()).unwrap();
        let gram = build_gram(&q, &k, &sample).unwrap();
        for i in 0..20 {
            // The lower triangle is mirrored, so pointwise equality is exact
            // on and above the diagonal and symmetry covers the rest.
            for j in 0..20 {
                assert_eq!(gram.entry(i, j), gram.entry(j, i));
            }
            for j in i..20 {
                assert_eq!(
                    gram.entry(i, j),
                    u_q(&q, &k, sample.row(i), sample.row(j)).unwrap()
                );
            }
        }
        assert_eq!(gram.model_label(), "gmm(k=2,d=1)");
    }

    #[test]
    fn gram_capacity_cap() {
        let q = std_normal_1d();
        let sample = q.sample(100, &mut substream(15, &[0])).unwrap();
        let k = RbfKernel::new(1.0).unwrap();
        let err = build_gram_with_cap(&q, &k, &sample, 1000).unwrap_err();
        match err {
            Error::Capacity(msg) => assert!(msg.contains("linear estimator")),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn u_v_statistics_and_their_identity() {
        let q = gmm_2();
        let sample = q.sample(40, &mut substream(16, &[0])).unwrap();
        let k = RbfKernel::new(median_bandwidth(&sample).unwrap()).unwrap();
        let gram = build_gram(&q, &k, &sample).unwrap();
        let u = u_statistic(&gram).unwrap();
        let v = v_statistic(&gram);
        assert!(v.value >= 0.0);
        // V = ((n-1)·U + diag mean)/n.
        let n = 40.0;
        assert_relative_eq!(
            v.value,
            ((n - 1.0) * u.value + gram.diag_mean()) / n,
            max_relative = 1e-12
        );
        // V is also the plain mean of all entries.
        assert_relative_eq!(v.value, gram.matrix().mean().unwrap(), max_relative = 1e-13);
    }

    #[test]
    fn two_point_gram_u_statistic_is_the_off_diagonal() {
        let q = std_normal_1d();
        let k = RbfKernel::new(1.0).unwrap();
        let sample = SampleSet::from_rows(&[vec![0.3], vec![-0.9]]).unwrap();
        let gram = build_gram(&q, &k, &sample).unwrap();
        let u = u_statistic(&gram).unwrap();
        assert_relative_eq!(u.value, gram.entry(0, 1), max_relative = 1e-14);
    }

    #[test]
    fn linear_statistic_pairing_and_edge_cases() {
        let q = std_normal_1d();
        let k = RbfKernel::new(1.0).unwrap();
        let rows: Vec<Vec<f64>> = vec![vec![0.1], vec![-0.7], vec![1.2], vec![0.4]];
        let sample = SampleSet::from_rows(&rows).unwrap();
        let est = linear_statistic(&q, &k, &sample).unwrap();
        let t1 = u_q(&q, &k, &rows[0], &rows[1]).unwrap();
        let t2 = u_q(&q, &k, &rows[2], &rows[3]).unwrap();
        assert_abs_diff_eq!(est.value, 0.5 * (t1 + t2), epsilon = 1e-15);
        let (_, var) = mean_and_variance(&[t1, t2]);
        assert_abs_diff_eq!(est.plugin_variance.unwrap(), var, epsilon = 1e-15);

        // n = 2 equals the U-statistic; the odd trailing point is ignored.
        let two = SampleSet::from_rows(&rows[..2]).unwrap();
        let gram = build_gram(&q, &k, &two).unwrap();
        let est2 = linear_statistic(&q, &k, &two).unwrap();
        assert_relative_eq!(est2.value, u_statistic(&gram).unwrap().value, max_relative = 1e-14);
        assert!(est2.plugin_variance.is_none());
        let three = SampleSet::from_rows(&rows[..3]).unwrap();
        assert_eq!(linear_statistic(&q, &k, &three).unwrap().value, est2.value);

        let one = SampleSet::from_rows(&rows[..1]).unwrap();
        assert!(linear_statistic(&q, &k, &one).is_err());
    }

    #[test]
    fn linear_statistic_null_mean_is_zero() {
        let q = std_normal_1d();
        let k = RbfKernel::new(1.0).unwrap();
        let vals: Vec<f64> = (0..2000u64)
            .map(|t| {
                let sample = q.sample(100, &mut substream(17, &[t])).unwrap();
                linear_statistic(&q, &k, &sample).unwrap().value
            })
            .collect();
        let (mean, var) = mean_and_variance(&vals);
        let stderr = (var / vals.len() as f64).sqrt();
        assert!(mean.abs() < 4.0 * stderr, "mean {mean} vs stderr {stderr}");
    }

    #[test]
    fn eigenvalues_of_scaled_identity_and_rank_one() {
        let n = 6;
        let gram = SteinGram::new(
            Array2::from_shape_fn((n, n), |(i, j)| if i == j { n as f64 } else { 0.0 }),
            "hand",
            1.0,
        )
        .unwrap();
        let null = gram_eigenvalues(&gram).unwrap();
        for v in &null.eigenvalues {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }

        let v: Vec<f64> = (1..=4).map(|i| i as f64).collect();
        let rank1 = SteinGram::new(
            Array2::from_shape_fn((4, 4), |(i, j)| v[i] * v[j]),
            "hand",
            1.0,
        )
        .unwrap();
        let null = gram_eigenvalues(&rank1).unwrap();
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        assert_relative_eq!(null.eigenvalues[0], norm2 / 4.0, max_relative = 1e-12);
        for v in &null.eigenvalues[1..] {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenvalue_sum_matches_diagonal_mean() {
        let q = gmm_2();
        let sample = q.sample(60, &mut substream(18, &[0])).unwrap();
        let k = RbfKernel::new(median_bandwidth(&sample).unwrap()).unwrap();
        let gram = build_gram(&q, &k, &sample).unwrap();
        let null = gram_eigenvalues(&gram).unwrap();
        let sum: f64 = null.eigenvalues.iter().sum();
        assert_relative_eq!(sum, gram.diag_mean(), max_relative = 1e-10);
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let gram = SteinGram::new(
            Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, -1.0]).unwrap(),
            "hand",
            1.0,
        )
        .unwrap();
        assert!(matches!(gram_eigenvalues(&gram), Err(Error::Numeric(_))));
        // Asymmetry is caught at construction.
        assert!(SteinGram::new(
            Array2::from_shape_vec((2, 2), vec![1.0, 0.5, 0.2, 1.0]).unwrap(),
            "hand",
            1.0
        )
        .is_err());
    }

    #[test]
    fn two_score_ksd_zero_at_equality_and_nonnegative() {
        let p = gmm_2();
        let k = RbfKernel::new(1.0).unwrap();
        let sample = p.sample(200, &mut substream(19, &[0])).unwrap();
        assert_eq!(ksd_two_score(&p, &p, &k, &sample).unwrap(), 0.0);
        let q = std_normal_1d();
        assert!(ksd_two_score(&p, &q, &k, &sample).unwrap() >= 0.0);
    }

    #[test]
    fn two_score_ksd_tracks_the_v_statistic() {
        // Both V-statistics estimate the same S(p, q); their difference is a
        // mean-zero V-statistic of d(x,x') = u_q - δᵀkδ, so after removing
        // the O(1/n) diagonal bias it must sit within a few projection-based
        // standard errors of zero.
        let p = ModelSpec::Gaussian(GaussianSpec::isotropic(vec![0.4], 1.0)).build().unwrap();
        let q = std_normal_1d();
        let k = RbfKernel::new(1.0).unwrap();
        let n = 2000;
        let sample = p.sample(n, &mut substream(20, &[0])).unwrap();
        let gram = build_gram(&q, &k, &sample).unwrap();
        let deltas: Vec<f64> = (0..n)
            .map(|i| {
                let x = sample.row(i);
                p.score(x).unwrap()[0] - q.score(x).unwrap()[0]
            })
            .collect();
        let mut proj = vec![0.0; n];
        let mut diag_mean = 0.0;
        for i in 0..n {
            let xi = sample.row(i);
            let mut row = 0.0;
            for j in 0..n {
                let two = deltas[i] * deltas[j] * k.eval(xi, sample.row(j));
                row += gram.entry(i, j) - two;
            }
            proj[i] = row / n as f64;
            diag_mean += (gram.entry(i, i) - deltas[i] * deltas[i]) / n as f64;
        }
        let (diff, var_proj) = mean_and_variance(&proj);
        let stderr = 2.0 * (var_proj / n as f64).sqrt();
        assert!(
            (diff - diag_mean / n as f64).abs() < 3.0 * stderr,
            "V(u_q) - V(two-score) = {diff} vs stderr {stderr}"
        );
    }

    #[test]
    fn mercer_reconstruction_converges_to_u_q() {
        // Eigendecompose the base kernel on a weighted grid, push the top-m
        // eigenfunctions through the Stein operator, and reconstruct u_q as
        // Σ λ_j (A e_j)(x) (A e_j)(y). The truncation error must fall as m
        // grows. Eigenfunction derivatives come from differentiating the
        // integral-operator identity λ e' (x) = ∫ ∂_x k(x,y) e(y) dy, so the
        // reconstruction shares no code path with the closed-form u_q.
        let q = gmm_2();
        let h = 0.6;
        let k = RbfKernel::new(h).unwrap();
        let n_grid = 200;
        let (a, b) = (-8.0, 8.0);
        let dx = (b - a) / (n_grid - 1) as f64;
        let grid: Vec<f64> = (0..n_grid).map(|i| a + i as f64 * dx).collect();
        let w: Vec<f64> = (0..n_grid)
            .map(|i| if i == 0 || i == n_grid - 1 { dx / 2.0 } else { dx })
            .collect();
        let sym = DMatrix::from_fn(n_grid, n_grid, |i, j| {
            k.eval(&[grid[i]], &[grid[j]]) * (w[i] * w[j]).sqrt()
        });
        let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 100_000).unwrap();
        let mut order: Vec<usize> = (0..n_grid).collect();
        order.sort_unstable_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let lam_max = eig.eigenvalues[order[0]];

        // (A e_j)(t_i) for every trusted mode, evaluated on the grid.
        let scores: Vec<f64> = grid.iter().map(|t| q.score(&[*t]).unwrap()[0]).collect();
        let trusted: Vec<(f64, Vec<f64>)> = order
            .iter()
            .filter(|&&idx| eig.eigenvalues[idx] > 1e-10 * lam_max)
            .map(|&idx| {
                let lam = eig.eigenvalues[idx];
                let e: Vec<f64> = (0..n_grid)
                    .map(|i| eig.eigenvectors[(i, idx)] / w[i].sqrt())
                    .collect();
                let ae: Vec<f64> = (0..n_grid)
                    .map(|i| {
                        let deriv: f64 = (0..n_grid)
                            .map(|l| {
                                let kd = k.eval(&[grid[i]], &[grid[l]]);
                                kd * (grid[l] - grid[i]) / (h * h) * w[l] * e[l]
                            })
                            .sum::<f64>()
                            / lam;
                        scores[i] * e[i] + deriv
                    })
                    .collect();
                (lam, ae)
            })
            .collect();

        let pts: Vec<usize> = (30..=170).step_by(20).collect();
        let err_at = |m: usize| -> f64 {
            let modes = &trusted[..m.min(trusted.len())];
            let mut worst: f64 = 0.0;
            for &i in &pts {
                for &j in &pts {
                    let approx: f64 = modes.iter().map(|(lam, ae)| lam * ae[i] * ae[j]).sum();
                    let exact = u_q(&q, &k, &[grid[i]], &[grid[j]]).unwrap();
                    worst = worst.max((approx - exact).abs());
                }
            }
            worst
        };
        let (e10, e50, e150) = (err_at(10), err_at(50), err_at(150));
        assert!(e10 > e50 && e50 > e150, "errors not decreasing: {e10} {e50} {e150}");
        assert!(e150 < 1e-6, "converged error too large: {e150}");
        assert!(e10 > 1e-4, "truncation at m=10 unexpectedly accurate: {e10}");
    }

    #[test]
    fn null_u_statistic_is_degenerate() {
        // Under p = q the variance of n·Ŝ_u is stable in n while the variance
        // of √n·Ŝ_u shrinks; that is the degeneracy that forces the bootstrap.
        let q = std_normal_1d();
        let k = RbfKernel::new(1.0).unwrap();
        let trials = 200u64;
        let var_scaled = |n: usize, scale: fn(f64) -> f64| -> f64 {
            let vals: Vec<f64> = (0..trials)
                .map(|t| {
                    let sample = q.sample(n, &mut substream(21, &[n as u64, t])).unwrap();
                    let gram = build_gram(&q, &k, &sample).unwrap();
                    scale(n as f64) * u_statistic(&gram).unwrap().value
                })
                .collect();
            mean_and_variance(&vals).1
        };
        let var_n_50 = var_scaled(50, |n| n);
        let var_n_400 = var_scaled(400, |n| n);
        assert!(
            var_n_400 / var_n_50 < 3.0 && var_n_400 / var_n_50 > 1.0 / 3.0,
            "n-scaled variance not stable: {var_n_50} vs {var_n_400}"
        );
        let var_s_50 = var_scaled(50, |n| n.sqrt());
        let var_s_400 = var_scaled(400, |n| n.sqrt());
        assert!(
            var_s_400 < var_s_50 / 3.0,
            "√n-scaled variance not shrinking: {var_s_50} vs {var_s_400}"
        );
    }
}
