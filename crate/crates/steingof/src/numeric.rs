//! Small numeric helpers shared across modules.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// log(sum_i exp(v_i)) with the usual max shift; -inf when every term is -inf.
pub fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// log of the arithmetic mean of exp(v_i).
pub fn logmeanexp(v: &[f64]) -> f64 {
    assert!(!v.is_empty(), "logmeanexp of an empty slice");
    logsumexp(v) - (v.len() as f64).ln()
}

/// Sample mean and unbiased (n - 1) variance; variance is 0 for n < 2.
pub fn mean_and_variance(v: &[f64]) -> (f64, f64) {
    assert!(!v.is_empty(), "mean of an empty slice");
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Empirical quantile of an ascending slice: the smallest element whose rank
/// is at least `level * m`, i.e. sorted[ceil(level * m) - 1].
pub fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty slice");
    assert!((0.0..=1.0).contains(&level), "quantile level out of range");
    let m = sorted.len();
    let k = ((level * m as f64).ceil() as usize).clamp(1, m);
    sorted[k - 1]
}

/// ln(2 cosh(t)) without overflow for large |t|.
pub fn ln_2cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Standard normal quantile; `p` must lie strictly inside (0, 1).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "normal quantile level must lie in (0, 1), got {p}"
        )));
    }
    Ok(Normal::new(0.0, 1.0).unwrap().inverse_cdf(p))
}

/// Central finite-difference gradient of a scalar function. The step is
/// scaled per coordinate by max(1, |x_l|).
pub fn central_fd_gradient<F>(mut f: F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for l in 0..x.len() {
        let hl = step * x[l].abs().max(1.0);
        xp[l] = x[l] + hl;
        let fp = f(&xp)?;
        xp[l] = x[l] - hl;
        let fm = f(&xp)?;
        xp[l] = x[l];
        g[l] = (fp - fm) / (2.0 * hl);
    }
    Ok(g)
}

/// Central finite-difference trace of the Jacobian of a vector field.
pub fn central_fd_jacobian_trace<F>(mut f: F, x: &[f64], step: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut trace = 0.0;
    let mut xp = x.to_vec();
    for l in 0..x.len() {
        let hl = step * x[l].abs().max(1.0);
        xp[l] = x[l] + hl;
        let fp = f(&xp)?;
        xp[l] = x[l] - hl;
        let fm = f(&xp)?;
        xp[l] = x[l];
        trace += (fp[l] - fm[l]) / (2.0 * hl);
    }
    Ok(trace)
}
