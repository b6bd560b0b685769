//! Dense-inverse Gaussian-process posterior.

use mann_core::oracles::GpParams;
use nalgebra::{DMatrix, DVector};

/// Predictive mean and variance through an explicit inverse.
pub fn dense_posterior(x: &[f64], y: &[f64], q: &[f64], d: usize, p: &GpParams) -> (f64, f64) {
    let n = y.len();
    let prior = p.signal_variance + p.noise_variance;
    if n == 0 {
        return (0.0, prior);
    }
    let k = DMatrix::from_fn(n, n, |i, j| {
        p.kernel(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d])
            + if i == j { p.noise_variance } else { 0.0 }
    });
    let inv = k.try_inverse().expect("invertible");
    let ks = DVector::from_fn(n, |i, _| p.kernel(&x[i * d..(i + 1) * d], q));
    let yv = DVector::from_column_slice(y);
    let mean = (ks.transpose() * &inv * yv)[0];
    let var = prior - (ks.transpose() * &inv * &ks)[0];
    (mean, var)
}
