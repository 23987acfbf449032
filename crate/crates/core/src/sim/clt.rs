//! Empirical check that shard means of heterogeneous clients behave like
//! i.i.d. Gaussians with variance `σ̄² / |H|`.
//!
//! A population of `n` clients is split evenly over `k` scalar components
//! `N(μ_i, σ_i²)`, client `j` belonging to component `j mod k`. Each trial
//! draws a random shard of `|H|` distinct clients, gives every member a
//! fresh sample from its component, and records the shard mean.
//!
//! Besides the within-component spread `σ̄²/|H|`, a shard mean carries the
//! spread of its members' component means, `σ_E²·(n − |H|)/((n − 1)|H|)`
//! with `σ_E²` the population variance of `μ_φ(j)`. At `|H| = 1` this adds
//! the full `σ_E²` (the law of total variance); for large `|H|` it shrinks
//! relative to `σ̄²/|H|` only through the finite-population factor.

use rand::seq::index;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::stats::{moments, Moments};

#[derive(Clone, Debug, PartialEq)]
pub struct CltSpec {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
    /// Number of clients in the population.
    pub population: usize,
}

impl CltSpec {
    pub fn validate(&self) -> Result<()> {
        if self.means.is_empty() || self.means.len() != self.stddevs.len() {
            return Err(Error::InvalidTask(
                "need hetero_k >= 1 means and as many stddevs".into(),
            ));
        }
        if self.stddevs.iter().any(|s| !(s.is_finite() && *s >= 0.0))
            || self.means.iter().any(|m| !m.is_finite())
        {
            return Err(Error::InvalidTask(
                "component parameters must be finite".into(),
            ));
        }
        if self.population < self.means.len() {
            return Err(Error::InvalidTask(
                "population smaller than hetero_k".into(),
            ));
        }
        Ok(())
    }

    pub fn hetero_k(&self) -> usize {
        self.means.len()
    }

    fn component(&self, client: usize) -> usize {
        client % self.means.len()
    }

    fn population_average(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.population)
            .map(|j| f(self.component(j)))
            .sum::<f64>()
            / self.population as f64
    }

    /// `μ̄`, the population average of the component means.
    pub fn mu_bar(&self) -> f64 {
        self.population_average(|c| self.means[c])
    }

    /// `σ̄²`, the population average of the component variances.
    pub fn sigma_bar_sq(&self) -> f64 {
        self.population_average(|c| self.stddevs[c] * self.stddevs[c])
    }

    /// `σ_E²`, the population variance of the component means.
    pub fn between_variance(&self) -> f64 {
        let mu = self.mu_bar();
        self.population_average(|c| (self.means[c] - mu).powi(2))
    }

    /// Exact variance of one trial's shard mean.
    pub fn exact_variance(&self, shard_size: usize) -> f64 {
        let (n, h) = (self.population as f64, shard_size as f64);
        let fpc = if self.population > 1 {
            (n - h) / (n - 1.0)
        } else {
            0.0
        };
        (self.sigma_bar_sq() + self.between_variance() * fpc) / h
    }
}

/// Shard means of `trials` independent resharding trials.
pub fn clt_trials(
    spec: &CltSpec,
    shard_size: usize,
    trials: usize,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if shard_size == 0 || shard_size > spec.population {
        return Err(Error::InvalidShardCount {
            n: spec.population,
            p: shard_size,
        });
    }
    let noise: Vec<Normal<f64>> = spec
        .stddevs
        .iter()
        .map(|&s| Normal::new(0.0, s).expect("validated"))
        .collect();
    Ok((0..trials)
        .map(|_| {
            let members = index::sample(rng, spec.population, shard_size);
            members
                .iter()
                .map(|j| {
                    let c = spec.component(j);
                    spec.means[c] + noise[c].sample(rng)
                })
                .sum::<f64>()
                / shard_size as f64
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CltReport {
    pub shard_size: usize,
    pub moments: Moments,
    /// `σ̄² / |H|`.
    pub predicted_variance: f64,
    /// Empirical variance over `predicted_variance`.
    pub variance_ratio: f64,
}

/// Moments of scalar shard means against the `σ̄² / |H|` prediction.
pub fn clt_check(shard_means: &[f64], shard_size: usize, spec: &CltSpec) -> Result<CltReport> {
    spec.validate()?;
    if shard_means.len() < 2 {
        return Err(Error::EmptyInput("clt check needs at least two trials"));
    }
    if shard_size == 0 {
        return Err(Error::InvalidConfig("shard size must be positive".into()));
    }
    let m = moments(shard_means);
    let predicted = spec.sigma_bar_sq() / shard_size as f64;
    Ok(CltReport {
        shard_size,
        variance_ratio: m.variance / predicted,
        moments: m,
        predicted_variance: predicted,
    })
}
