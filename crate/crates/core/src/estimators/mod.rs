//! Robust mean estimators over a set of candidate updates.
//!
//! All estimators are pure functions of an [`UpdateSet`]. Only [`average`]
//! and the FilterL2 family read the row weights; the order-statistic rules
//! treat every row equally.

mod basic;
mod filter;
mod krum;
mod power;

pub use basic::{average, coordinate_median, trimmed_mean, TrimConfig, TrimReading};
pub use filter::{
    filter_l2, filter_l2_sectioned, section_bounds, FilterConfig, FilterOutcome, SectionedOutcome,
};
pub use krum::{bulyan, krum, BulyanInner, KrumConfig, KrumSelection};
pub use power::{top_eigenpair, Eigenpair};

use crate::codec::RealVector;
use crate::error::{Error, Result};

/// `m` candidate updates of dimension `d` with non-negative weights.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateSet {
    data: Vec<f64>,
    rows: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl UpdateSet {
    /// Builds a set with unit weights.
    pub fn new(rows: &[RealVector]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or(Error::EmptyInput("update set needs rows"))?;
        let dim = first.dim();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.dim(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            data,
            rows: rows.len(),
            dim,
            weights: vec![1.0; rows.len()],
        })
    }

    /// Builds a set from row-major data.
    pub fn from_flat(data: Vec<f64>, rows: usize, dim: usize) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::EmptyInput("update set needs rows"));
        }
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                expected: rows * dim,
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            data,
            rows,
            dim,
            weights: vec![1.0; rows],
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidWeights(
                "weights must be finite and non-negative".into(),
            ));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidWeights("weights sum to zero".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// The sub-set restricted to coordinates `lo..hi`, keeping weights.
    pub fn columns(&self, lo: usize, hi: usize) -> UpdateSet {
        assert!(lo < hi && hi <= self.dim);
        let mut data = Vec::with_capacity(self.rows * (hi - lo));
        for r in self.rows() {
            data.extend_from_slice(&r[lo..hi]);
        }
        UpdateSet {
            data,
            rows: self.rows,
            dim: hi - lo,
            weights: self.weights.clone(),
        }
    }

    /// The sub-set consisting of the listed rows, in the listed order.
    pub fn select(&self, indices: &[usize]) -> UpdateSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        UpdateSet {
            data,
            rows: indices.len(),
            dim: self.dim,
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    pub fn to_rows(&self) -> Vec<RealVector> {
        self.rows()
            .map(|r| RealVector::new(r.to_vec()).expect("rows are finite"))
            .collect()
    }
}

/// Server-side aggregation rule.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimator {
    Average,
    Median,
    TrimmedMean(TrimConfig),
    Krum(KrumConfig),
    Bulyan { cfg: KrumConfig, inner: BulyanInner },
    FilterL2(FilterConfig),
}

/// Estimator output plus whatever diagnostics the rule produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: RealVector,
    /// Krum's selected row.
    pub selected: Option<usize>,
    /// FilterL2: final top eigenvalue (max over sections).
    pub lambda_max: Option<f64>,
    /// FilterL2: final per-row weights (mean over sections).
    pub weights: Option<Vec<f64>>,
    /// FilterL2: iterations used (max over sections).
    pub iterations: Option<usize>,
}

impl Aggregate {
    fn plain(mean: RealVector) -> Self {
        Self {
            mean,
            selected: None,
            lambda_max: None,
            weights: None,
            iterations: None,
        }
    }
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Average => "average",
            Estimator::Median => "median",
            Estimator::TrimmedMean(_) => "trimmed-mean",
            Estimator::Krum(_) => "krum",
            Estimator::Bulyan {
                inner: BulyanInner::Krum,
                ..
            } => "bulyan-krum",
            Estimator::Bulyan {
                inner: BulyanInner::TrimmedMean,
                ..
            } => "bulyan-trimmed-mean",
            Estimator::FilterL2(_) => "filter-l2",
        }
    }

    /// Minimum number of rows the rule accepts.
    pub fn min_rows(&self) -> usize {
        match self {
            Estimator::Krum(c) => 2 * c.f + 3,
            Estimator::Bulyan { cfg, .. } => 4 * cfg.f + 3,
            _ => 1,
        }
    }

    /// Fails early if the rule cannot run on `m` rows of dimension `d`.
    pub fn check_shape(&self, m: usize, d: usize) -> Result<()> {
        if m < self.min_rows() {
            return Err(Error::TooFewRows {
                rule: self.name(),
                required: self.min_rows(),
                found: m,
            });
        }
        match self {
            Estimator::TrimmedMean(t) => t.validate(),
            Estimator::FilterL2(c) => c.validate(d),
            _ => Ok(()),
        }
    }

    pub fn aggregate(&self, u: &UpdateSet) -> Result<Aggregate> {
        match self {
            Estimator::Average => Ok(Aggregate::plain(average(u))),
            Estimator::Median => Ok(Aggregate::plain(coordinate_median(u))),
            Estimator::TrimmedMean(cfg) => Ok(Aggregate::plain(trimmed_mean(u, cfg)?)),
            Estimator::Krum(cfg) => {
                let sel = krum(u, cfg)?;
                Ok(Aggregate {
                    selected: Some(sel.index),
                    ..Aggregate::plain(sel.value)
                })
            }
            Estimator::Bulyan { cfg, inner } => Ok(Aggregate::plain(bulyan(u, cfg, *inner)?)),
            Estimator::FilterL2(cfg) => {
                let out = filter_l2_sectioned(u, cfg)?;
                let k = out.sections.len() as f64;
                let mut weights = vec![0.0; u.len()];
                for s in &out.sections {
                    for (a, w) in weights.iter_mut().zip(&s.weights) {
                        *a += w / k;
                    }
                }
                Ok(Aggregate {
                    mean: out.mean,
                    selected: None,
                    lambda_max: out.sections.iter().map(|s| s.lambda_max).reduce(f64::max),
                    weights: Some(weights),
                    iterations: out.sections.iter().map(|s| s.iterations).max(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(v: &[f64]) -> RealVector {
        RealVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn update_set_validation() {
        assert!(UpdateSet::new(&[]).is_err());
        assert!(UpdateSet::new(&[rv(&[1.0]), rv(&[1.0, 2.0])]).is_err());
        let u = UpdateSet::new(&[rv(&[1.0, 2.0]), rv(&[3.0, 4.0])]).unwrap();
        assert!(u.clone().with_weights(vec![0.0, 0.0]).is_err());
        assert!(u.clone().with_weights(vec![-1.0, 2.0]).is_err());
        assert!(u.clone().with_weights(vec![1.0]).is_err());
        assert_eq!(u.column(1), vec![2.0, 4.0]);
        assert_eq!(u.columns(1, 2).row(1), &[4.0]);
        assert_eq!(u.select(&[1]).row(0), &[3.0, 4.0]);
    }

    #[test]
    fn shape_checks_report_rule() {
        let b = Estimator::Bulyan {
            cfg: KrumConfig { f: 4 },
            inner: BulyanInner::Krum,
        };
        assert_eq!(
            b.check_shape(10, 5),
            Err(Error::TooFewRows {
                rule: "bulyan-krum",
                required: 19,
                found: 10
            })
        );
        assert!(b.check_shape(19, 5).is_ok());
        assert!(Estimator::Krum(KrumConfig { f: 1 })
            .check_shape(4, 1)
            .is_err());
    }
}
