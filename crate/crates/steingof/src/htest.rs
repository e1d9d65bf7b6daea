//! Hypothesis tests on top of the KSD estimators.
//!
//! Under H0: p = q the U-statistic is degenerate, so n·Ŝ_u converges to a
//! weighted sum Σ_j c_j (Z_j² − 1) of centered χ² terms rather than a
//! Gaussian, and ordinary resampling is invalid. Two calibrations of that
//! limit are provided: the multinomial-weight bootstrap for degenerate
//! U-statistics, and direct simulation from the eigenvalues of the Stein
//! Gram matrix. The linear estimator instead has a plain Gaussian null at a
//! √n rate, trading power for O(n) cost and a closed-form threshold.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{Bandwidth, RbfKernel};
use crate::model::ScoreModel;
use crate::numeric::{empirical_quantile, std_normal_cdf, std_normal_quantile};
use crate::report::{Decision, Method, TestReport};
use crate::sample::SampleSet;
use crate::stein::{build_gram, gram_eigenvalues, linear_statistic, u_statistic, SpectralNull, SteinGram};

/// Substream domains so replicate streams never collide across test kinds.
const DOMAIN_BOOTSTRAP: u64 = 1;
const DOMAIN_SPECTRAL: u64 = 2;

/// One multinomial draw w ~ Mult(n; 1/n, …, 1/n).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapWeights {
    counts: Vec<u64>,
}

impl BootstrapWeights {
    /// Validates that `counts` is a genuine multinomial outcome: length n,
    /// total n.
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let n = counts.len() as u64;
        let total: u64 = counts.iter().sum();
        if n == 0 || total != n {
            return Err(Error::InvalidInput(format!(
                "bootstrap counts must sum to their length, got {total} over {n}"
            )));
        }
        Ok(BootstrapWeights { counts })
    }

    /// Draws by throwing n balls into n cells uniformly.
    pub fn draw(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut counts = vec![0u64; n];
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
        BootstrapWeights { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// One bootstrap replicate Ŝ*_u = Σ_{i≠j} aᵢaⱼ u_q(xᵢ,xⱼ) with
/// aᵢ = wᵢ/n − 1/n, computed as the full quadratic form minus the diagonal.
pub fn bootstrap_replicate(gram: &SteinGram, weights: &BootstrapWeights) -> f64 {
    let n = gram.n();
    assert_eq!(n, weights.counts.len(), "weights must match the Gram size");
    let inv = 1.0 / n as f64;
    let a: Vec<f64> = weights.counts.iter().map(|c| *c as f64 * inv - inv).collect();
    let m = gram.matrix();
    let mut quad = 0.0;
    let mut diag = 0.0;
    for i in 0..n {
        let row = m.row(i);
        let mut dot = 0.0;
        for j in 0..n {
            dot += row[j] * a[j];
        }
        quad += a[i] * dot;
        diag += a[i] * a[i] * m[[i, i]];
    }
    quad - diag
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// The bootstrap goodness-of-fit test. Computes Ŝ_u, draws `replicates`
/// multinomial weight vectors on independent substreams of `seed`, and
/// rejects when the smoothed p-value (1 + #{Ŝ* ≥ Ŝ_u})/(m + 1) falls below
/// alpha. Ties count as exceedances, which keeps the level conservative.
/// The raw exceedance count and the (1 − alpha) replicate quantile are kept
/// in the report.
pub fn ksd_bootstrap_test(
    model: &dyn ScoreModel,
    bandwidth: Bandwidth,
    sample: &SampleSet,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    if replicates < 100 {
        return Err(Error::InvalidInput(format!(
            "bootstrap needs at least 100 replicates, got {replicates}"
        )));
    }
    let h = bandwidth.resolve(sample)?;
    let kernel = RbfKernel::new(h)?;
    let gram = build_gram(model, &kernel, sample)?;
    let statistic = u_statistic(&gram)?.value;
    let n = sample.n();
    let mut sims: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::rng::substream(seed, &[DOMAIN_BOOTSTRAP, i as u64]);
            bootstrap_replicate(&gram, &BootstrapWeights::draw(n, &mut rng))
        })
        .collect();
    let exceed = sims.iter().filter(|s| **s >= statistic).count();
    let p_value = (1 + exceed) as f64 / (replicates + 1) as f64;
    sims.sort_unstable_by(f64::total_cmp);
    let threshold = empirical_quantile(&sims, 1.0 - alpha);
    Ok(TestReport {
        method: Method::KsdBootstrap,
        statistic,
        p_value: Some(p_value),
        threshold: Some(threshold),
        alpha,
        decision: if p_value < alpha { Decision::Reject } else { Decision::Retain },
        n,
        replicates: Some(replicates),
        bandwidth: Some(h),
        seed,
        model_label: model.label().to_string(),
        exceed_count: Some(exceed),
        variant: None,
    })
}

/// How the linear test turns the pair variance into a rejection threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearScaling {
    /// Compare the mean of m pair terms against z_{1−α}·σ̂/√m. This is the
    /// scaling with a valid asymptotic level and the default.
    #[default]
    StandardizedMean,
    /// Compare against z_{1−α}·σ̂ with no √m factor, the literal reading of
    /// the rejection rule as sometimes written; kept for comparison only.
    RawSigma,
}

impl LinearScaling {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinearScaling::StandardizedMean => "standardized-mean",
            LinearScaling::RawSigma => "raw-sigma",
        }
    }
}

impl std::str::FromStr for LinearScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standardized-mean" => Ok(LinearScaling::StandardizedMean),
            "raw-sigma" => Ok(LinearScaling::RawSigma),
            other => Err(Error::InvalidInput(format!(
                "linear scaling must be 'standardized-mean' or 'raw-sigma', got '{other}'"
            ))),
        }
    }
}

/// The O(n) test: Gaussian null for the linear estimator. Requires n ≥ 4 so
/// the pair variance is estimable.
pub fn ksd_linear_test(
    model: &dyn ScoreModel,
    bandwidth: Bandwidth,
    sample: &SampleSet,
    alpha: f64,
    scaling: LinearScaling,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    if sample.n() < 4 {
        return Err(Error::InvalidInput(format!(
            "linear test needs at least 4 points, got {}",
            sample.n()
        )));
    }
    let h = bandwidth.resolve(sample)?;
    let kernel = RbfKernel::new(h)?;
    let est = linear_statistic(model, &kernel, sample)?;
    let variance = est.plugin_variance.expect("n >= 4 gives >= 2 pairs");
    if variance <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let sigma = variance.sqrt();
    let pairs = (sample.n() / 2) as f64;
    let z = std_normal_quantile(1.0 - alpha)?;
    let (threshold, standardized) = match scaling {
        LinearScaling::StandardizedMean => (z * sigma / pairs.sqrt(), pairs.sqrt() * est.value / sigma),
        LinearScaling::RawSigma => (z * sigma, est.value / sigma),
    };
    let p_value = 1.0 - std_normal_cdf(standardized);
    Ok(TestReport {
        method: Method::KsdLinear,
        statistic: est.value,
        p_value: Some(p_value),
        threshold: Some(threshold),
        alpha,
        decision: if p_value < alpha { Decision::Reject } else { Decision::Retain },
        n: sample.n(),
        replicates: None,
        bandwidth: Some(h),
        seed: 0,
        model_label: model.label().to_string(),
        exceed_count: None,
        variant: Some(scaling.as_str().to_string()),
    })
}

/// Empirical (1 − alpha) quantile of Σ_j c_j (Z_j² − 1), the null limit of
/// n·Ŝ_u, simulated with `draws` independent replicates.
pub fn spectral_null_quantile(
    null: &SpectralNull,
    alpha: f64,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    check_alpha(alpha)?;
    if draws < 100 {
        return Err(Error::InvalidInput(format!(
            "null simulation needs at least 100 draws, got {draws}"
        )));
    }
    let active: Vec<f64> = null.eigenvalues.iter().copied().filter(|c| *c > 0.0).collect();
    if active.is_empty() {
        return Err(Error::DegenerateSpectrum);
    }
    let mut sims: Vec<f64> = (0..draws)
        .map(|_| {
            active
                .iter()
                .map(|c| {
                    let z: f64 = rng.sample(StandardNormal);
                    c * (z * z - 1.0)
                })
                .sum()
        })
        .collect();
    sims.sort_unstable_by(f64::total_cmp);
    Ok(empirical_quantile(&sims, 1.0 - alpha))
}

/// The spectral test: reject when n·Ŝ_u exceeds the simulated null quantile
/// computed from the Gram eigenvalues.
pub fn ksd_spectral_test(
    model: &dyn ScoreModel,
    bandwidth: Bandwidth,
    sample: &SampleSet,
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let h = bandwidth.resolve(sample)?;
    let kernel = RbfKernel::new(h)?;
    let gram = build_gram(model, &kernel, sample)?;
    let statistic = sample.n() as f64 * u_statistic(&gram)?.value;
    let null = gram_eigenvalues(&gram)?;
    let mut rng = crate::rng::substream(seed, &[DOMAIN_SPECTRAL]);
    let threshold = spectral_null_quantile(&null, alpha, draws, &mut rng)?;
    Ok(TestReport {
        method: Method::KsdSpectral,
        statistic,
        p_value: None,
        threshold: Some(threshold),
        alpha,
        decision: if statistic > threshold { Decision::Reject } else { Decision::Retain },
        n: sample.n(),
        replicates: Some(draws),
        bandwidth: Some(h),
        seed,
        model_label: model.label().to_string(),
        exceed_count: None,
        variant: None,
    })
}
