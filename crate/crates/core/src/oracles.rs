//! Reference computations the learned models are measured against: exact
//! Gaussian-process prediction, a raw-pixel nearest-neighbour classifier
//! and numeric differentiation.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MannError, Result};

/// Diagonal jitter tried, in order, when a Gram matrix fails to factor.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Smallest predictive variance reported.
pub const VARIANCE_FLOOR: f64 = 1e-10;

/// Squared-exponential kernel hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub signal_variance: f64,
    pub length_scale: f64,
    pub noise_variance: f64,
}

impl GpParams {
    /// Defaults for `d`-dimensional inputs on the unit cube.
    pub fn for_dim(d: usize) -> Self {
        Self {
            signal_variance: 1.0,
            length_scale: 0.3 * (d as f64).sqrt(),
            noise_variance: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.signal_variance > 0.0
            && self.length_scale > 0.0
            && self.noise_variance >= 0.0
            && self.signal_variance.is_finite()
            && self.length_scale.is_finite()
            && self.noise_variance.is_finite();
        if ok {
            Ok(())
        } else {
            Err(MannError::Config(format!("invalid GP parameters {self:?}")))
        }
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.signal_variance * (-0.5 * sq / (self.length_scale * self.length_scale)).exp()
    }

    /// Gram matrix of `points` (rows of width `d`) plus noise on the diagonal.
    pub fn gram(&self, points: &[f64], d: usize) -> Vec<f64> {
        let n = points.len() / d;
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = self.kernel(&points[i * d..(i + 1) * d], &points[j * d..(j + 1) * d]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
            k[i * n + i] += self.noise_variance;
        }
        k
    }
}

/// Lower Cholesky factor of a row-major `n × n` matrix, retrying with the
/// jitter ladder. Returns the factor and the jitter that was needed.
pub fn cholesky(matrix: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    for &jitter in &JITTER_LADDER {
        if let Some(l) = try_cholesky(matrix, n, jitter) {
            return Ok((l, jitter));
        }
    }
    Err(MannError::NotPositiveDefinite {
        jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
    })
}

fn try_cholesky(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                let d = s + jitter;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn forward_substitute(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * x[k]).sum();
        x[i] = (b[i] - s) / l[i * n + i];
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn backward_substitute(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (b[i] - s) / l[i * n + i];
    }
    x
}

/// Negative log density of `y` under `Normal(mean, variance)`.
pub fn gaussian_nll(y: f64, mean: f64, variance: f64) -> f64 {
    0.5 * (2.0 * PI * variance).ln() + (y - mean) * (y - mean) / (2.0 * variance)
}

/// Predictive mean and variance (observation noise included) at each query.
/// Inputs are row-major with `d` columns.
pub fn gp_posterior(
    train_x: &[f64],
    train_y: &[f64],
    query_x: &[f64],
    d: usize,
    params: &GpParams,
) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    let n = train_y.len();
    if d == 0 || train_x.len() != n * d || !query_x.len().is_multiple_of(d) {
        return Err(MannError::InvalidArgument(
            "GP inputs do not match the dimension".into(),
        ));
    }
    let prior = params.signal_variance + params.noise_variance;
    if n == 0 {
        return Ok(vec![(0.0, prior); query_x.len() / d]);
    }
    let (l, _) = cholesky(&params.gram(train_x, d), n)?;
    let alpha = backward_substitute(&l, n, &forward_substitute(&l, n, train_y));
    Ok(query_x
        .chunks(d)
        .map(|q| {
            let k: Vec<f64> = train_x.chunks(d).map(|x| params.kernel(x, q)).collect();
            let mean = k.iter().zip(&alpha).map(|(a, b)| a * b).sum();
            let v = forward_substitute(&l, n, &k);
            let var = prior - v.iter().map(|x| x * x).sum::<f64>();
            (mean, var.max(VARIANCE_FLOOR))
        })
        .collect())
}

/// Per-step NLL of `y[t]` given the first `t` points, in presentation order.
/// The Cholesky factor is grown one row per step; a step whose pivot fails
/// is refactored from scratch with the jitter ladder.
pub fn gp_sequential_nll(x: &[f64], y: &[f64], d: usize, params: &GpParams) -> Result<Vec<f64>> {
    params.validate()?;
    let steps = y.len();
    if d == 0 || x.len() != steps * d {
        return Err(MannError::InvalidArgument(
            "GP inputs do not match the dimension".into(),
        ));
    }
    let prior = params.signal_variance + params.noise_variance;
    // rows of L stored ragged: row i has i + 1 entries
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut jitter = 0.0;
    let mut nll = Vec::with_capacity(steps);
    for t in 0..steps {
        let xt = &x[t * d..(t + 1) * d];
        let k: Vec<f64> = (0..t)
            .map(|i| params.kernel(&x[i * d..(i + 1) * d], xt))
            .collect();
        let mut v = vec![0.0; t];
        for i in 0..t {
            let s: f64 = (0..i).map(|j| rows[i][j] * v[j]).sum();
            v[i] = (k[i] - s) / rows[i][i];
        }
        // z = L⁻¹ y[..t]; recomputed per step to stay exact under refactoring
        let mut z = vec![0.0; t];
        for i in 0..t {
            let s: f64 = (0..i).map(|j| rows[i][j] * z[j]).sum();
            z[i] = (y[i] - s) / rows[i][i];
        }
        let mean: f64 = v.iter().zip(&z).map(|(a, b)| a * b).sum();
        let schur = prior - v.iter().map(|a| a * a).sum::<f64>();
        nll.push(gaussian_nll(y[t], mean, schur.max(VARIANCE_FLOOR)));

        let pivot = schur + jitter;
        if pivot > 0.0 && pivot.is_finite() {
            let mut row = v;
            row.push(pivot.sqrt());
            rows.push(row);
        } else {
            let n = t + 1;
            let mut gram = params.gram(&x[..n * d], d);
            for i in 0..n {
                gram[i * n + i] += jitter;
            }
            let (l, extra) = cholesky(&gram, n)?;
            jitter += extra;
            rows = (0..n).map(|i| l[i * n..i * n + i + 1].to_vec()).collect();
        }
    }
    Ok(nll)
}

/// One-nearest-neighbour classifier over everything seen so far.
#[derive(Clone, Debug, Default)]
pub struct KnnStore {
    points: Vec<(Vec<f64>, usize)>,
}

impl KnnStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn insert(&mut self, x: Vec<f64>, label: usize) {
        self.points.push((x, label));
    }

    /// Label of the L2-nearest stored point (earliest insertion wins ties);
    /// a uniform guess over `num_labels` when nothing is stored.
    pub fn predict<R: Rng + ?Sized>(&self, query: &[f64], num_labels: usize, rng: &mut R) -> usize {
        let mut best: Option<(f64, usize)> = None;
        for (x, label) in &self.points {
            let d: f64 = x.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, *label));
            }
        }
        match best {
            Some((_, label)) => label,
            None => rng.random_range(0..num_labels),
        }
    }
}

/// Expected first-instance accuracy of the nearest-neighbour classifier.
pub fn knn_first_instance_analytic(n: usize) -> f64 {
    1.0 / (n * n) as f64
}

/// Central-difference gradient of `f` at `params`.
pub fn finite_diff_grad<F>(mut f: F, params: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let first = f(params);
    let second = f(params);
    if first.to_bits() != second.to_bits() {
        return Err(MannError::NonDeterministic { first, second });
    }
    let mut p = params.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + step;
        let plus = f(&p);
        p[i] = orig - step;
        let minus = f(&p);
        p[i] = orig;
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}
