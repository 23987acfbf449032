//! Matrix-free power iteration for the top eigenpair of a weighted
//! covariance `(1/W) Σ_i w_i a_i a_iᵀ`, applied as `(1/W)·Aᵀ(w ∘ (A x))`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{Purpose, SeededRng};

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit-norm eigenvector estimate.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Fixed, data-independent start vector so results do not depend on call
/// history.
fn start_vector(d: usize) -> Vec<f64> {
    let mut rng = SeededRng::for_purpose(0, Purpose::Power, &[d as u64]);
    let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
    for (j, v) in x.iter_mut().enumerate() {
        if j % 2 == 1 {
            *v = -*v;
        }
    }
    normalize(&mut x);
    x
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|a| *a /= n);
    }
    n
}

/// Top eigenpair of the weighted covariance of `centered` (row-major
/// `m × d`). Runs at most `max_iters` steps and stops early once successive
/// Rayleigh quotients differ by at most `tol · |λ|`.
pub fn top_eigenpair(
    centered: &[f64],
    d: usize,
    weights: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<Eigenpair> {
    let m = weights.len();
    if d == 0 || centered.len() != m * d {
        return Err(Error::DimensionMismatch {
            expected: m * d,
            found: centered.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::InvalidWeights("no positive weight".into()));
    }
    let mut x = start_vector(d);
    let mut z = vec![0.0; d];
    let mut lambda = f64::NAN;
    for it in 1..=max_iters.max(1) {
        z.iter_mut().for_each(|a| *a = 0.0);
        for (row, &w) in centered.chunks_exact(d).zip(weights) {
            if w == 0.0 {
                continue;
            }
            let y: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            let s = w * y / total;
            for (acc, a) in z.iter_mut().zip(row) {
                *acc += s * a;
            }
        }
        let rayleigh: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        let norm = normalize(&mut z);
        if norm == 0.0 {
            return Ok(Eigenpair {
                value: 0.0,
                vector: x,
                iterations: it,
                converged: true,
            });
        }
        std::mem::swap(&mut x, &mut z);
        let done = (rayleigh - lambda).abs() <= tol * rayleigh.abs();
        lambda = rayleigh;
        if done {
            return Ok(Eigenpair {
                value: lambda,
                vector: x,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(Eigenpair {
        value: lambda,
        vector: x,
        iterations: max_iters.max(1),
        converged: false,
    })
}
