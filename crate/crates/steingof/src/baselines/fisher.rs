//! Computable part of the Fisher divergence.
//!
//! The Fisher divergence E_p‖s_p − s_q‖² splits, via integration by parts,
//! into E_p‖s_p‖² plus E_p[‖s_q‖² + 2∇·s_q]. Only the second term depends
//! on the model, so its sample mean is a diagnostic that bounds the kernel
//! discrepancy without ever touching the data score.

use crate::error::{Error, Result};
use crate::model::ScoreModel;
use crate::numeric::central_fd_jacobian_trace;
use crate::sample::SampleSet;

const FD_STEP: f64 = 1e-5;

fn phi_q(model: &dyn ScoreModel, x: &[f64]) -> Result<f64> {
    let score = model.score(x)?;
    let norm_sq: f64 = score.iter().map(|s| s * s).sum();
    let trace = match model.score_jacobian_trace(x) {
        Ok(t) => t,
        Err(Error::Unsupported(_)) => {
            central_fd_jacobian_trace(|y| model.score(y), x, FD_STEP)?
        }
        Err(e) => return Err(e),
    };
    Ok(norm_sq + 2.0 * trace)
}

/// Sample mean of ‖s_q‖² + 2∇·s_q. Falls back to a finite-difference
/// Jacobian trace when the model has no analytic one.
pub fn fisher_partial_statistic(model: &dyn ScoreModel, sample: &SampleSet) -> Result<f64> {
    if sample.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: sample.dim() });
    }
    let mut total = 0.0;
    for i in 0..sample.n() {
        let value = phi_q(model, sample.row(i))?;
        if !value.is_finite() {
            return Err(Error::Numeric(format!("Fisher term at sample row {i} is not finite")));
        }
        total += value;
    }
    Ok(total / sample.n() as f64)
}
