//! The likelihood-ratio oracle for simple-vs-simple discrimination.
//!
//! Both candidate densities are fully known, so the optimal discriminator is
//! available: classify the sample as drawn from whichever model gives it the
//! higher exact log likelihood. This is a lower bound on achievable error for
//! every practical test, not a method usable with unnormalized models.

use crate::error::Result;
use crate::model::ScoreModel;
use crate::report::{Decision, Method, TestReport};
use crate::sample::SampleSet;

/// Tests H0 "sample ~ q" against the simple alternative p. The statistic is
/// the signed log-likelihood ratio 2 Σᵢ [log p(xᵢ) − log q(xᵢ)] with
/// threshold 0: positive values favor p, so the null is rejected exactly
/// when the alternative explains the data strictly better; a tie retains.
/// Requires exact (normalized) log densities on both models.
pub fn lr_oracle_test(
    model_p: &dyn ScoreModel,
    model_q: &dyn ScoreModel,
    sample: &SampleSet,
    alpha: f64,
) -> Result<TestReport> {
    let mut statistic = 0.0;
    for i in 0..sample.n() {
        let x = sample.row(i);
        statistic += 2.0 * (model_p.log_density(x)? - model_q.log_density(x)?);
    }
    Ok(TestReport {
        method: Method::LrOracle,
        statistic,
        p_value: None,
        threshold: Some(0.0),
        alpha,
        decision: if statistic > 0.0 { Decision::Reject } else { Decision::Retain },
        n: sample.n(),
        replicates: None,
        bandwidth: None,
        seed: 0,
        model_label: format!("p={},q={}", model_p.label(), model_q.label()),
        exceed_count: None,
        variant: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::model::{GaussianSpec, GbRbmSpec, Model, ModelSpec};
    use crate::numeric::{ln_2cosh, logsumexp};
    use crate::rng::substream;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn gauss(mean: f64) -> Model {
        ModelSpec::Gaussian(GaussianSpec::isotropic(vec![mean], 1.0)).build().unwrap()
    }

    #[test]
    fn identical_models_give_zero_and_retain() {
        let q = gauss(0.0);
        let sample = q.sample(50, &mut substream(51, &[0])).unwrap();
        let r = lr_oracle_test(&q, &q, &sample, 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.decision, Decision::Retain);
        r.validate().unwrap();
    }

    #[test]
    fn equidistant_point_gives_zero() {
        let p = gauss(1.0);
        let q = gauss(0.0);
        let sample = SampleSet::from_rows(&[vec![0.5]]).unwrap();
        let r = lr_oracle_test(&p, &q, &sample, 0.05).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.0, epsilon = 1e-12);
        assert_eq!(r.decision, Decision::Retain);
    }

    #[test]
    fn oracle_discriminates_close_gaussians() {
        let p = gauss(0.5);
        let q = gauss(0.0);
        let from_p = p.sample(200, &mut substream(52, &[0])).unwrap();
        let from_q = q.sample(200, &mut substream(52, &[1])).unwrap();
        assert_eq!(lr_oracle_test(&p, &q, &from_p, 0.05).unwrap().decision, Decision::Reject);
        assert_eq!(lr_oracle_test(&p, &q, &from_q, 0.05).unwrap().decision, Decision::Retain);
    }

    #[test]
    fn rbm_statistic_matches_independent_enumeration() {
        let (d, dp) = (6, 8);
        let mut rng = substream(53, &[0]);
        let coupling: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..dp).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect())
            .collect();
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        let c: Vec<f64> = (0..dp).map(|_| rng.random_range(-0.5..0.5)).collect();
        let spec = GbRbmSpec { coupling: coupling.clone(), b: b.clone(), c: c.clone() };
        let model_p = ModelSpec::Gbrbm(spec).build().unwrap();
        let model_q = gaussian_like(&b);
        let sample = model_q.sample(20, &mut substream(53, &[1])).unwrap();
        let r = lr_oracle_test(&model_p, &model_q, &sample, 0.05).unwrap();

        // Plain binary enumeration, no gray-code sharing with the model code.
        let d_f = d as f64;
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let mut per_h = Vec::new();
        for mask in 0u32..(1 << dp) {
            let h: Vec<f64> = (0..dp)
                .map(|l| if mask >> l & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            let mut sq = 0.0;
            for i in 0..d {
                let mut bh = b[i];
                for l in 0..dp {
                    bh += coupling[i][l] * h[l];
                }
                sq += bh * bh;
            }
            let ch: f64 = (0..dp).map(|l| c[l] * h[l]).sum();
            per_h.push(0.5 * sq + ch);
        }
        let log_z = d_f / 2.0 * ln_2pi + logsumexp(&per_h);
        let mut expected = 0.0;
        for i in 0..sample.n() {
            let x = sample.row(i);
            let mut unnorm = 0.0;
            for l in 0..dp {
                let mut phi = c[l];
                for (i, xi) in x.iter().enumerate() {
                    phi += coupling[i][l] * xi;
                }
                unnorm += ln_2cosh(phi);
            }
            for (i, xi) in x.iter().enumerate() {
                unnorm += b[i] * xi - 0.5 * xi * xi;
            }
            let log_p = unnorm - log_z;
            expected += 2.0 * (log_p - model_q.log_density(x).unwrap());
        }
        assert_abs_diff_eq!(r.statistic, expected, epsilon = 1e-8);
    }

    fn gaussian_like(mean: &[f64]) -> Model {
        ModelSpec::Gaussian(GaussianSpec::isotropic(mean.to_vec(), 1.0)).build().unwrap()
    }

    #[test]
    fn missing_density_is_unsupported() {
        // A wide RBM has no tractable normalizer, so the oracle must refuse.
        let wide = GbRbmSpec {
            coupling: vec![vec![0.0; 21]; 2],
            b: vec![0.0; 2],
            c: vec![0.0; 21],
        };
        let p = ModelSpec::Gbrbm(wide).build().unwrap();
        let q = ModelSpec::Gaussian(GaussianSpec::isotropic(vec![0.0; 2], 1.0)).build().unwrap();
        let sample = SampleSet::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            lr_oracle_test(&p, &q, &sample, 0.05),
            Err(Error::Capacity(_) | Error::Unsupported(_))
        ));
    }
}
