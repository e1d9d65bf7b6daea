//! Gaussian RBF kernel with the derivative bundle used by Stein operators.
//!
//! With r2 = ||x - y||^2 and bandwidth h:
//!   k(x, y)     = exp(-r2 / (2 h^2))
//!   grad_x k    = k (y - x) / h^2
//!   grad_y k    = k (x - y) / h^2
//!   cross trace = sum_l d^2 k / dx_l dy_l = k (d / h^2 - r2 / h^4)

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sample::SampleSet;

/// Radial basis function kernel exp(-||x - y||^2 / (2 h^2)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfKernel {
    bandwidth: f64,
}

/// Kernel value, both gradients, and the mixed second-derivative trace,
/// evaluated in one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDerivatives {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    pub cross_trace: f64,
}

impl RbfKernel {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "kernel bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Kernel value alone.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), y.len(), "kernel arguments must share a dimension");
        let h2 = self.bandwidth * self.bandwidth;
        (-squared_distance(x, y) / (2.0 * h2)).exp()
    }

    /// Value, gradients in both arguments, and the cross trace.
    pub fn eval_with_derivatives(&self, x: &[f64], y: &[f64]) -> KernelDerivatives {
        assert_eq!(x.len(), y.len(), "kernel arguments must share a dimension");
        let d = x.len();
        let h2 = self.bandwidth * self.bandwidth;
        let r2 = squared_distance(x, y);
        let value = (-r2 / (2.0 * h2)).exp();
        let mut grad_x = vec![0.0; d];
        let mut grad_y = vec![0.0; d];
        for l in 0..d {
            let g = value * (y[l] - x[l]) / h2;
            grad_x[l] = g;
            grad_y[l] = -g;
        }
        let cross_trace = value * (d as f64 / h2 - r2 / (h2 * h2));
        KernelDerivatives { value, grad_x, grad_y, cross_trace }
    }
}

pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Bandwidth policy: the median-distance heuristic or an explicit value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Median,
    Fixed(f64),
}

impl Bandwidth {
    /// Resolves the policy against a sample.
    pub fn resolve(&self, sample: &SampleSet) -> Result<f64> {
        match self {
            Bandwidth::Median => median_bandwidth(sample),
            Bandwidth::Fixed(h) => {
                RbfKernel::new(*h)?;
                Ok(*h)
            }
        }
    }
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "median" {
            return Ok(Bandwidth::Median);
        }
        let h: f64 = s.parse().map_err(|_| {
            Error::InvalidInput(format!(
                "bandwidth must be 'median' or a positive number, got '{s}'"
            ))
        })?;
        RbfKernel::new(h)?;
        Ok(Bandwidth::Fixed(h))
    }
}

/// Median of the strictly positive pairwise Euclidean distances, computed by
/// exact selection; even counts take the lower of the two middle elements.
/// Zero distances from duplicate points are excluded. Errors when all points
/// coincide.
pub fn median_bandwidth(sample: &SampleSet) -> Result<f64> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::InvalidInput(
            "median bandwidth needs at least two points".into(),
        ));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = squared_distance(sample.row(i), sample.row(j));
            if d2 > 0.0 {
                dists.push(d2.sqrt());
            }
        }
    }
    if dists.is_empty() {
        return Err(Error::DegenerateSample);
    }
    let mid = (dists.len() - 1) / 2;
    let (_, med, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    Ok(*med)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn hand_values() {
        let k = RbfKernel::new(1.0).unwrap();
        // ||x - y||^2 = 2 and 2 h^2 = 2, so k = e^{-1}.
        assert_relative_eq!(
            k.eval(&[0.0], &[2.0f64.sqrt()]),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );

        // Identical points: value 1, zero gradients, cross trace d / h^2.
        let h = 0.7;
        let k = RbfKernel::new(h).unwrap();
        let d = k.eval_with_derivatives(&[1.0, -2.0, 0.5], &[1.0, -2.0, 0.5]);
        assert_eq!(d.value, 1.0);
        assert_eq!(d.grad_x, vec![0.0; 3]);
        assert_eq!(d.grad_y, vec![0.0; 3]);
        assert_relative_eq!(d.cross_trace, 3.0 / (h * h), max_relative = 1e-15);
    }

    #[test]
    fn rejects_bad_bandwidth() {
        assert!(RbfKernel::new(0.0).is_err());
        assert!(RbfKernel::new(-1.0).is_err());
        assert!(RbfKernel::new(f64::NAN).is_err());
        assert!(RbfKernel::new(f64::INFINITY).is_err());
    }

    /// Central finite differences for grad_x, grad_y; a four-point stencil for
    /// the mixed trace.
    fn fd_derivatives(k: &RbfKernel, x: &[f64], y: &[f64], step: f64) -> KernelDerivatives {
        let d = x.len();
        let mut grad_x = vec![0.0; d];
        let mut grad_y = vec![0.0; d];
        let mut cross = 0.0;
        let mut xs = x.to_vec();
        let mut ys = y.to_vec();
        for l in 0..d {
            xs[l] = x[l] + step;
            let fp = k.eval(&xs, y);
            xs[l] = x[l] - step;
            let fm = k.eval(&xs, y);
            xs[l] = x[l];
            grad_x[l] = (fp - fm) / (2.0 * step);

            ys[l] = y[l] + step;
            let gp = k.eval(x, &ys);
            ys[l] = y[l] - step;
            let gm = k.eval(x, &ys);
            ys[l] = y[l];
            grad_y[l] = (gp - gm) / (2.0 * step);

            let mut stencil = 0.0;
            for (sx, sy, w) in [
                (step, step, 1.0),
                (step, -step, -1.0),
                (-step, step, -1.0),
                (-step, -step, 1.0),
            ] {
                xs[l] = x[l] + sx;
                ys[l] = y[l] + sy;
                stencil += w * k.eval(&xs, &ys);
                xs[l] = x[l];
                ys[l] = y[l];
            }
            cross += stencil / (4.0 * step * step);
        }
        KernelDerivatives { value: k.eval(x, y), grad_x, grad_y, cross_trace: cross }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = crate::rng::substream(11, &[0]);
        let k = RbfKernel::new(0.9).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = k.eval_with_derivatives(&x, &y);
            let f = fd_derivatives(&k, &x, &y, 1e-4);
            for l in 0..3 {
                assert_relative_eq!(a.grad_x[l], f.grad_x[l], epsilon = 1e-7);
                assert_relative_eq!(a.grad_y[l], f.grad_y[l], epsilon = 1e-7);
            }
            assert_relative_eq!(a.cross_trace, f.cross_trace, epsilon = 1e-5, max_relative = 1e-5);
        }
    }

    #[test]
    fn median_hand_values() {
        // Points {0, 1, 3}: distances {1, 2, 3}, median 2.
        let s = SampleSet::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(median_bandwidth(&s).unwrap(), 2.0);

        // Even count takes the lower median: distances {1, 2, 3, 3, 4, 1} ->
        // sorted {1, 1, 2, 3, 3, 4} -> lower middle 2.
        let s = SampleSet::from_rows(&[vec![0.0], vec![1.0], vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(median_bandwidth(&s).unwrap(), 2.0);

        // Duplicate points contribute no distance.
        let s = SampleSet::from_rows(&[vec![0.0], vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(median_bandwidth(&s).unwrap(), 1.0);
    }

    #[test]
    fn median_degenerate_cases() {
        let s = SampleSet::from_rows(&[vec![2.0], vec![2.0], vec![2.0]]).unwrap();
        assert!(matches!(median_bandwidth(&s), Err(Error::DegenerateSample)));
        let s = SampleSet::from_rows(&[vec![2.0]]).unwrap();
        assert!(median_bandwidth(&s).is_err());
    }

    #[test]
    fn bandwidth_parsing() {
        assert_eq!("median".parse::<Bandwidth>().unwrap(), Bandwidth::Median);
        assert_eq!("0.5".parse::<Bandwidth>().unwrap(), Bandwidth::Fixed(0.5));
        assert!("-1".parse::<Bandwidth>().is_err());
        assert!("x".parse::<Bandwidth>().is_err());
    }

    #[test]
    fn scaling_by_two_is_exact() {
        // Doubling points and bandwidth multiplies by exact powers of two, so
        // the kernel value is bit-identical.
        let k1 = RbfKernel::new(0.37).unwrap();
        let k2 = RbfKernel::new(0.74).unwrap();
        let x = [0.21, -1.7, 3.3];
        let y = [1.02, 0.4, -0.6];
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        assert_eq!(k1.eval(&x, &y), k2.eval(&x2, &y2));
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric_and_bounded(
            x in proptest::collection::vec(-10.0f64..10.0, 1..5),
            h in 0.1f64..5.0,
        ) {
            let y: Vec<f64> = x.iter().map(|v| v + 0.5).collect();
            let k = RbfKernel::new(h).unwrap();
            let kxy = k.eval(&x, &y);
            prop_assert_eq!(kxy, k.eval(&y, &x));
            prop_assert!(kxy > 0.0 && kxy <= 1.0);
            let d = k.eval_with_derivatives(&x, &y);
            for l in 0..x.len() {
                prop_assert_eq!(d.grad_y[l], -d.grad_x[l]);
            }
        }
    }
}
