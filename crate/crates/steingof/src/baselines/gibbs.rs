//! Blocked Gibbs sampling for the Gaussian-Bernoulli RBM.
//!
//! The two conditionals are exact: h | x has independent ±1 components with
//! P(h_l = +1) = σ(2(Bᵀx + c)_l), and x | h ~ N(Bh + b, I). A sweep updates
//! h then x. The chain starts at x = b (the B = 0 mode), burns in, and then
//! records one visible state per sweep.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::GbRbmModel;
use crate::sample::SampleSet;

/// One full h-then-x sweep, in place.
pub fn gibbs_sweep(model: &GbRbmModel, x: &mut DVector<f64>, rng: &mut ChaCha8Rng) {
    let phi = model.coupling().tr_mul(x) + model.hidden_bias();
    let h = DVector::from_fn(phi.nrows(), |l, _| {
        let p_plus = 1.0 / (1.0 + (-2.0 * phi[l]).exp());
        if rng.random::<f64>() < p_plus {
            1.0
        } else {
            -1.0
        }
    });
    let mean = model.coupling() * h + model.visible_bias();
    for i in 0..x.nrows() {
        x[i] = mean[i] + rng.sample::<f64, _>(StandardNormal);
    }
}

/// Runs the chain for `burn_in + steps` sweeps and returns the `steps`
/// visible states recorded after burn-in, one row per sweep.
pub fn gibbs_sampler(
    model: &GbRbmModel,
    steps: usize,
    burn_in: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SampleSet> {
    if steps == 0 {
        return Err(Error::InvalidInput("Gibbs sampler needs at least one step".into()));
    }
    let mut x = model.visible_bias().clone();
    for _ in 0..burn_in {
        gibbs_sweep(model, &mut x, rng);
    }
    let mut rows = Vec::with_capacity(steps);
    for _ in 0..steps {
        gibbs_sweep(model, &mut x, rng);
        rows.push(x.iter().copied().collect::<Vec<f64>>());
    }
    SampleSet::from_rows(&rows)
}
