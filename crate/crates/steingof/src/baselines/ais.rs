//! Annealed importance sampling for the RBM partition function.
//!
//! The annealing path scales only the coupling term: π_β(x, h) ∝
//! exp(β·xᵀBh + bᵀx + cᵀh − ½‖x‖²). At β = 0 the model factorizes with the
//! tractable normalizer Z₀ = (2π)^{d/2} e^{‖b‖²/2} Π_l 2cosh(c_l), and every
//! intermediate conditional stays exact, so each β step is one tempered
//! Gibbs sweep. Chain weights accumulate logw += (β_t − β_{t−1})·xᵀBh along
//! a linear temperature grid, and log Z = log Z₀ + logmeanexp(logw).
//!
//! This is a diagnostic for normalizer-dependent baselines, not a test.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GbRbmModel, ScoreModel};
use crate::numeric::{ln_2cosh, logmeanexp, mean_and_variance};
use crate::rng::substream;

const DOMAIN_AIS: u64 = 5;

/// An AIS run: the estimate plus enough metadata to judge it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AisResult {
    pub log_z: f64,
    /// Standard error of the mean log-weight across chains.
    pub stderr: f64,
    pub temps: usize,
    pub chains: usize,
}

/// log Z₀ of the factorized β = 0 model.
fn log_z_base(model: &GbRbmModel) -> f64 {
    let d = model.dim() as f64;
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let b_sq = model.visible_bias().norm_squared();
    let hidden: f64 = model.hidden_bias().iter().map(|c| ln_2cosh(*c)).sum();
    d / 2.0 * ln_2pi + 0.5 * b_sq + hidden
}

fn ais_chain(model: &GbRbmModel, temps: usize, rng: &mut ChaCha8Rng) -> f64 {
    let d = model.dim();
    let dp = model.hidden_dim();
    let b = model.visible_bias();
    let c = model.hidden_bias();
    let coupling = model.coupling();
    let mut x = DVector::from_fn(d, |i, _| b[i] + rng.sample::<f64, _>(StandardNormal));
    let mut h = DVector::from_fn(dp, |l, _| {
        let p_plus = 1.0 / (1.0 + (-2.0 * c[l]).exp());
        if rng.random::<f64>() < p_plus {
            1.0
        } else {
            -1.0
        }
    });
    let mut logw = 0.0;
    let mut beta_prev = 0.0;
    for t in 1..temps {
        let beta = t as f64 / (temps - 1) as f64;
        let btx = coupling.tr_mul(&x);
        logw += (beta - beta_prev) * btx.dot(&h);
        // One Gibbs sweep targeting π_beta.
        for l in 0..dp {
            let p_plus = 1.0 / (1.0 + (-2.0 * (beta * btx[l] + c[l])).exp());
            h[l] = if rng.random::<f64>() < p_plus { 1.0 } else { -1.0 };
        }
        let mean = coupling * &h * beta + b;
        for i in 0..d {
            x[i] = mean[i] + rng.sample::<f64, _>(StandardNormal);
        }
        beta_prev = beta;
    }
    logw
}

/// Estimates log Z with `num_chains` independent annealing runs over a
/// linear grid of `num_temps` temperatures. Chains run on independent
/// substreams of `seed`, so the result is deterministic and
/// schedule-independent.
pub fn estimate_log_z_ais(
    model: &GbRbmModel,
    num_temps: usize,
    num_chains: usize,
    seed: u64,
) -> Result<AisResult> {
    if num_temps < 2 {
        return Err(Error::InvalidInput(format!(
            "AIS needs at least 2 temperatures, got {num_temps}"
        )));
    }
    if num_chains < 2 {
        return Err(Error::InvalidInput(format!(
            "AIS needs at least 2 chains, got {num_chains}"
        )));
    }
    let logws: Vec<f64> = (0..num_chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = substream(seed, &[DOMAIN_AIS, chain as u64]);
            ais_chain(model, num_temps, &mut rng)
        })
        .collect();
    for (chain, w) in logws.iter().enumerate() {
        if !w.is_finite() {
            return Err(Error::Numeric(format!("non-finite AIS weight in chain {chain}")));
        }
    }
    let (_, var) = mean_and_variance(&logws);
    Ok(AisResult {
        log_z: log_z_base(model) + logmeanexp(&logws),
        stderr: (var / num_chains as f64).sqrt(),
        temps: num_temps,
        chains: num_chains,
    })
}
