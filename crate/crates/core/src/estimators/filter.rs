//! FilterL2: iterative spectral filtering.
//!
//! Each iteration computes the weighted mean `μ_w` and the top eigenpair
//! `(λ, v)` of the weighted covariance. If `λ ≤ spectral_factor · σ²` or the
//! iteration cap `eta` is reached, `μ_w` is returned. Otherwise every active
//! row gets the score `τ_i = ⟨x_i − μ_w, v⟩²` and is downweighted by
//! `w_i ← w_i · (1 − τ_i / τ_max)`, negative weights clamped to zero.

use crate::codec::RealVector;
use crate::error::{Error, Result};

use super::power::top_eigenpair;
use super::UpdateSet;

#[derive(Clone, Debug, PartialEq)]
pub struct FilterConfig {
    /// Bound `σ` on the operator norm of the benign covariance (as `σ²`).
    pub sigma: f64,
    /// Maximum number of filtering iterations.
    pub eta: usize,
    /// Stop once `λ ≤ spectral_factor · σ²`.
    pub spectral_factor: f64,
    pub power_iters: usize,
    /// Relative tolerance on successive Rayleigh quotients.
    pub power_tol: f64,
    /// Number of contiguous coordinate blocks filtered independently.
    pub sections: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            sigma: 1e-6,
            eta: 20,
            spectral_factor: 20.0,
            power_iters: 500,
            power_tol: 1e-6,
            sections: 1,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidFilter(format!(
                "sigma={} must be >= 0",
                self.sigma
            )));
        }
        if self.eta == 0 {
            return Err(Error::InvalidFilter("eta must be positive".into()));
        }
        if !(self.spectral_factor.is_finite() && self.spectral_factor > 0.0) {
            return Err(Error::InvalidFilter(
                "spectral_factor must be positive".into(),
            ));
        }
        if self.power_iters == 0 {
            return Err(Error::InvalidFilter("power_iters must be positive".into()));
        }
        if !(self.power_tol.is_finite() && self.power_tol > 0.0) {
            return Err(Error::InvalidFilter("power_tol must be positive".into()));
        }
        if self.sections == 0 || self.sections > d {
            return Err(Error::InvalidSections {
                sections: self.sections,
                dim: d,
            });
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        self.spectral_factor * self.sigma * self.sigma
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterOutcome {
    pub mean: RealVector,
    /// Weights the returned mean was computed with.
    pub weights: Vec<f64>,
    /// Weights at the start of every iteration, first entry = input weights.
    pub weight_history: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Top eigenvalue at the final iteration, or the covariance trace (an
    /// upper bound) when that alone met the stopping threshold.
    pub lambda_max: f64,
    pub lambda_is_trace_bound: bool,
    /// Whether every power iteration met its tolerance.
    pub power_converged: bool,
    /// Set when a downweighting step zeroed every weight; `mean` is then the
    /// last mean computed from positive weights.
    pub weights_exhausted: bool,
}

fn weighted_mean(u: &UpdateSet, w: &[f64], total: f64) -> Vec<f64> {
    let mut mu = vec![0.0; u.dim()];
    for (row, &wi) in u.rows().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for (a, x) in mu.iter_mut().zip(row) {
            *a += wi * x;
        }
    }
    mu.iter_mut().for_each(|a| *a /= total);
    mu
}

/// Robust mean of `u` by spectral filtering. Always terminates within
/// `cfg.eta` iterations.
pub fn filter_l2(u: &UpdateSet, cfg: &FilterConfig) -> Result<FilterOutcome> {
    cfg.validate(u.dim())?;
    let d = u.dim();
    let threshold = cfg.threshold();
    let mut w = u.weights().to_vec();
    let mut history = Vec::with_capacity(cfg.eta);
    let mut power_converged = true;
    let mut centered = vec![0.0; u.len() * d];

    for it in 1..=cfg.eta {
        history.push(w.clone());
        let total: f64 = w.iter().sum();
        let mu = weighted_mean(u, &w, total);
        for (dst, row) in centered.chunks_exact_mut(d).zip(u.rows()) {
            for ((c, x), m) in dst.iter_mut().zip(row).zip(&mu) {
                *c = x - m;
            }
        }
        // λ_max ≤ trace, so a small weighted trace settles the stopping
        // test without an eigensolve.
        let trace = centered
            .chunks_exact(d)
            .zip(&w)
            .map(|(c, &wi)| wi * c.iter().map(|a| a * a).sum::<f64>())
            .sum::<f64>()
            / total;
        if trace <= threshold {
            return Ok(FilterOutcome {
                mean: RealVector::new(mu)?,
                weights: w,
                weight_history: history,
                iterations: it,
                lambda_max: trace,
                lambda_is_trace_bound: true,
                power_converged,
                weights_exhausted: false,
            });
        }
        let eig = top_eigenpair(&centered, d, &w, cfg.power_iters, cfg.power_tol)?;
        power_converged &= eig.converged;
        let finish = |w: Vec<f64>, exhausted: bool| -> Result<FilterOutcome> {
            Ok(FilterOutcome {
                mean: RealVector::new(mu.clone())?,
                weights: w,
                weight_history: history.clone(),
                iterations: it,
                lambda_max: eig.value,
                lambda_is_trace_bound: false,
                power_converged,
                weights_exhausted: exhausted,
            })
        };
        if eig.value <= threshold || it == cfg.eta {
            return finish(w, false);
        }

        let tau: Vec<f64> = centered
            .chunks_exact(d)
            .zip(&w)
            .map(|(c, &wi)| {
                if wi == 0.0 {
                    0.0
                } else {
                    let p: f64 = c.iter().zip(&eig.vector).map(|(a, b)| a * b).sum();
                    p * p
                }
            })
            .collect();
        let tau_max = tau.iter().copied().fold(0.0, f64::max);
        if tau_max <= 0.0 {
            return finish(w, false);
        }
        let next: Vec<f64> = w
            .iter()
            .zip(&tau)
            .map(|(&wi, &t)| (wi * (1.0 - t / tau_max)).max(0.0))
            .collect();
        if next.iter().sum::<f64>() <= 0.0 {
            return finish(w, true);
        }
        w = next;
    }
    unreachable!("loop returns at it == eta")
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectionedOutcome {
    pub mean: RealVector,
    pub sections: Vec<FilterOutcome>,
}

/// Boundaries of `k` contiguous blocks covering `0..d`. The first `d mod k`
/// blocks hold one extra coordinate, so exactly `k` non-empty blocks exist.
pub fn section_bounds(d: usize, k: usize) -> Vec<(usize, usize)> {
    let (base, extra) = (d / k, d % k);
    let mut out = Vec::with_capacity(k);
    let mut lo = 0;
    for s in 0..k {
        let hi = lo + base + usize::from(s < extra);
        out.push((lo, hi));
        lo = hi;
    }
    out
}

/// Runs [`filter_l2`] independently on `cfg.sections` coordinate blocks and
/// concatenates the block means. With one section this is exactly
/// `filter_l2`.
pub fn filter_l2_sectioned(u: &UpdateSet, cfg: &FilterConfig) -> Result<SectionedOutcome> {
    cfg.validate(u.dim())?;
    if cfg.sections == 1 {
        let out = filter_l2(u, cfg)?;
        return Ok(SectionedOutcome {
            mean: out.mean.clone(),
            sections: vec![out],
        });
    }
    let mut mean = Vec::with_capacity(u.dim());
    let mut sections = Vec::with_capacity(cfg.sections);
    let block_cfg = FilterConfig {
        sections: 1,
        ..cfg.clone()
    };
    for (lo, hi) in section_bounds(u.dim(), cfg.sections) {
        let out = filter_l2(&u.columns(lo, hi), &block_cfg)?;
        mean.extend_from_slice(&out.mean);
        sections.push(out);
    }
    Ok(SectionedOutcome {
        mean: RealVector::new(mean)?,
        sections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::average;
    use crate::rng::{Purpose, SeededRng};
    use rand_distr::{Distribution, Normal, StandardNormal};

    fn gaussian_rows(m: usize, d: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = SeededRng::for_purpose(seed, Purpose::Check, &[m as u64, d as u64]);
        let n = Normal::new(0.0, scale).unwrap();
        (0..m)
            .map(|_| (0..d).map(|_| n.sample(&mut rng)).collect())
            .collect()
    }

    fn set(rows: &[Vec<f64>]) -> UpdateSet {
        let rs: Vec<RealVector> = rows
            .iter()
            .map(|r| RealVector::new(r.clone()).unwrap())
            .collect();
        UpdateSet::new(&rs).unwrap()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    #[test]
    fn zero_variance_returns_after_one_iteration() {
        let mu = vec![1.5, -2.0, 0.25];
        let out = filter_l2(&set(&vec![mu.clone(); 10]), &FilterConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.mean.as_slice(), mu.as_slice());
        assert_eq!(out.lambda_max, 0.0);
    }

    #[test]
    fn clean_gaussian_is_within_sampling_error() {
        let (m, d) = (400, 32);
        let rows = gaussian_rows(m, d, 1.0, 1);
        let cfg = FilterConfig {
            sigma: 1.0,
            ..FilterConfig::default()
        };
        let out = filter_l2(&set(&rows), &cfg).unwrap();
        assert!(norm(&out.mean) <= 2.0 * (d as f64 / m as f64).sqrt());
    }

    /// The contaminated-Gaussian instance used throughout: 90% benign rows
    /// `N(0, I/d)`, 10% rows at `0.5·1`.
    fn contaminated(d: usize, seed: u64) -> (UpdateSet, Vec<f64>) {
        let m = 200;
        let bad = 20;
        let mut rows = gaussian_rows(m - bad, d, 1.0 / (d as f64).sqrt(), seed);
        rows.extend(std::iter::repeat_n(vec![0.5; d], bad));
        (set(&rows), vec![0.0; d])
    }

    #[test]
    fn removes_shifted_cluster() {
        let (u, mu) = contaminated(256, 2);
        let cfg = FilterConfig {
            sigma: 0.1,
            ..FilterConfig::default()
        };
        let out = filter_l2(&u, &cfg).unwrap();
        let err = norm(
            &out.mean
                .iter()
                .zip(&mu)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        assert!(err <= 3.0 * 0.1f64.sqrt(), "err = {err}");
        let avg_err = norm(&average(&u));
        assert!((avg_err - 0.8).abs() < 0.1, "avg err = {avg_err}");
        assert!(out.weights[180..].iter().all(|&w| w == 0.0));
    }

    #[test]
    fn weights_monotone_and_bounded() {
        let (u, _) = contaminated(64, 3);
        let out = filter_l2(&u, &FilterConfig::default()).unwrap();
        assert_eq!(out.iterations, 20);
        for pair in out.weight_history.windows(2) {
            for (a, b) in pair[0].iter().zip(&pair[1]) {
                assert!(b <= a && *b >= 0.0 && *a <= 1.0);
            }
        }
    }

    #[test]
    fn all_weights_zeroed_is_flagged() {
        // Two symmetric points share τ_max and are both zeroed.
        let u = set(&[vec![1.0], vec![-1.0]]);
        let out = filter_l2(&u, &FilterConfig::default()).unwrap();
        assert!(out.weights_exhausted);
        assert_eq!(out.mean.as_slice(), &[0.0]);
    }

    #[test]
    fn sections_one_is_bitwise_filter() {
        let (u, _) = contaminated(48, 4);
        let cfg = FilterConfig {
            sigma: 0.1,
            ..FilterConfig::default()
        };
        let a = filter_l2(&u, &cfg).unwrap().mean;
        let b = filter_l2_sectioned(&u, &cfg).unwrap().mean;
        assert_eq!(a, b);
    }

    #[test]
    fn sections_equal_dim_filters_each_coordinate() {
        let (u, _) = contaminated(8, 5);
        let cfg = FilterConfig {
            sigma: 0.1,
            sections: 8,
            ..FilterConfig::default()
        };
        let out = filter_l2_sectioned(&u, &cfg).unwrap();
        assert_eq!(out.sections.len(), 8);
        let scalar = FilterConfig {
            sections: 1,
            ..cfg.clone()
        };
        for j in 0..8 {
            let single = filter_l2(&u.columns(j, j + 1), &scalar).unwrap();
            assert_eq!(single.mean[0], out.mean[j]);
        }
        let bad = FilterConfig { sections: 9, ..cfg };
        assert!(filter_l2_sectioned(&u, &bad).is_err());
    }

    #[test]
    fn section_bounds_cover() {
        assert_eq!(section_bounds(10, 4), vec![(0, 3), (3, 6), (6, 8), (8, 10)]);
        assert_eq!(section_bounds(4096, 32).len(), 32);
        assert!(section_bounds(4096, 32).iter().all(|(a, b)| b - a == 128));
    }

    #[test]
    fn translation_equivariance() {
        let (u, _) = contaminated(16, 6);
        let cfg = FilterConfig {
            sigma: 0.1,
            ..FilterConfig::default()
        };
        let mut rng = SeededRng::for_purpose(6, Purpose::Check, &[99]);
        let c: Vec<f64> = (0..16)
            .map(|_| {
                3.0 * {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                }
            })
            .collect();
        let shifted: Vec<Vec<f64>> = u
            .rows()
            .map(|r| r.iter().zip(&c).map(|(a, b)| a + b).collect())
            .collect();
        let a = filter_l2(&u, &cfg).unwrap().mean;
        let b = filter_l2(&set(&shifted), &cfg).unwrap().mean;
        for j in 0..16 {
            assert!((a[j] + c[j] - b[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn config_validation() {
        let d = 4;
        let ok = FilterConfig::default();
        assert!(ok.validate(d).is_ok());
        assert!(FilterConfig {
            eta: 0,
            ..ok.clone()
        }
        .validate(d)
        .is_err());
        assert!(FilterConfig {
            power_tol: 0.0,
            ..ok.clone()
        }
        .validate(d)
        .is_err());
        assert!(FilterConfig {
            sigma: -1.0,
            ..ok.clone()
        }
        .validate(d)
        .is_err());
        assert!(FilterConfig { sections: 0, ..ok }.validate(d).is_err());
    }
}
