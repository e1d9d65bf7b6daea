//! One-dimensional Kolmogorov-Smirnov baseline.
//!
//! Requires the model CDF, so it only applies to univariate targets with a
//! tractable distribution function. The p-value uses the asymptotic
//! Kolmogorov distribution of √n·D with a theta-function expansion for
//! small arguments and the alternating series for large ones.

use crate::error::{Error, Result};
use crate::model::ScoreModel;
use crate::report::{Decision, Method, TestReport};
use crate::sample::SampleSet;

/// Survival function of the Kolmogorov distribution at λ = √n·D.
pub(crate) fn ks_asymptotic_p(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // 1 − K(λ) with K in theta form; three terms suffice below 1.18.
        let z = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let sum: f64 = (1..=3)
            .map(|k| {
                let odd = (2 * k - 1) as f64;
                (-odd * odd * z).exp()
            })
            .sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..200 {
            let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-16 {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}

/// KS test of a univariate sample against an arbitrary CDF.
pub fn ks_test_1d<F>(cdf: F, sample: &SampleSet, alpha: f64, model_label: &str) -> Result<TestReport>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if sample.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: sample.dim() });
    }
    let n = sample.n();
    let mut values: Vec<f64> = (0..n).map(|i| sample.row(i)[0]).collect();
    values.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d_stat: f64 = 0.0;
    for (i, x) in values.iter().enumerate() {
        let f = cdf(*x)?;
        if !f.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&f) {
            return Err(Error::Numeric(format!("CDF value {f} at x = {x} is not a probability")));
        }
        let f = f.clamp(0.0, 1.0);
        let upper = (i + 1) as f64 / nf - f;
        let lower = f - i as f64 / nf;
        d_stat = d_stat.max(upper).max(lower);
    }
    let p = ks_asymptotic_p(nf.sqrt() * d_stat);
    Ok(TestReport {
        method: Method::Ks,
        statistic: d_stat,
        p_value: Some(p),
        threshold: None,
        alpha,
        decision: if p < alpha { Decision::Reject } else { Decision::Retain },
        n,
        replicates: None,
        bandwidth: None,
        seed: 0,
        model_label: model_label.to_string(),
        exceed_count: None,
        variant: None,
    })
}

/// KS test against a model's distribution function. Only univariate models
/// with a CDF qualify; everything else reports `Unsupported`.
pub fn ks_test_model(model: &dyn ScoreModel, sample: &SampleSet, alpha: f64) -> Result<TestReport> {
    if model.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "KS baseline needs a univariate model, {} has dimension {}",
            model.label(),
            model.dim()
        )));
    }
    ks_test_1d(|x| model.cdf_1d(x), sample, alpha, model.label())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GaussianSpec, ModelSpec};
    use crate::rng::substream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn std_normal() -> crate::model::Model {
        ModelSpec::Gaussian(GaussianSpec::isotropic(vec![0.0], 1.0)).build().unwrap()
    }

    #[test]
    fn single_point_against_median() {
        let sample = SampleSet::from_rows(&[vec![0.0]]).unwrap();
        let report = ks_test_1d(|_| Ok(0.5), &sample, 0.05, "flat").unwrap();
        assert_eq!(report.statistic, 0.5);
        assert_eq!(report.decision, Decision::Retain);
    }

    #[test]
    fn kolmogorov_survival_reference_values() {
        assert!((ks_asymptotic_p(1.0) - 0.27000).abs() < 1e-3);
        // Branches agree where they meet.
        assert!((ks_asymptotic_p(1.18 - 1e-9) - ks_asymptotic_p(1.18 + 1e-9)).abs() < 1e-6);
        assert_eq!(ks_asymptotic_p(0.0), 1.0);
        assert!(ks_asymptotic_p(4.0) < 1e-10);
    }

    #[test]
    fn null_rejection_rate_is_near_alpha() {
        let mut rejects = 0;
        for trial in 0..200u64 {
            let mut rng = substream(55, &[trial]);
            let rows: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random::<f64>()]).collect();
            let sample = SampleSet::from_rows(&rows).unwrap();
            let report = ks_test_1d(|x| Ok(x.clamp(0.0, 1.0)), &sample, 0.05, "uniform").unwrap();
            if report.decision == Decision::Reject {
                rejects += 1;
            }
        }
        let rate = rejects as f64 / 200.0;
        assert!((0.01..=0.12).contains(&rate), "null rejection rate {rate}");
    }

    #[test]
    fn detects_a_shifted_gaussian() {
        let mut rng = substream(56, &[0]);
        let rows: Vec<Vec<f64>> =
            (0..100).map(|_| vec![1.0 + rng.sample::<f64, _>(StandardNormal)]).collect();
        let sample = SampleSet::from_rows(&rows).unwrap();
        let model = std_normal();
        let report = ks_test_model(&model, &sample, 0.05).unwrap();
        assert_eq!(report.decision, Decision::Reject);
        assert_eq!(report.model_label, "gaussian(d=1)");
    }

    #[test]
    fn multivariate_models_are_refused() {
        let model =
            ModelSpec::Gaussian(GaussianSpec::isotropic(vec![0.0, 0.0], 1.0)).build().unwrap();
        let sample = SampleSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            ks_test_model(&model, &sample, 0.05),
            Err(Error::Unsupported(_))
        ));
    }
}
