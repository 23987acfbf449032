use crate::error::{Error, Result};

/// Row-major feature matrix with optional integer labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Option<Vec<usize>>,
    dim: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Option<Vec<usize>>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyVector);
        }
        if !features.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: features.len() % dim,
            });
        }
        if let Some(index) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(l) = &labels {
            if l.len() != features.len() / dim {
                return Err(Error::DimensionMismatch {
                    expected: features.len() / dim,
                    found: l.len(),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            dim,
        })
    }

    pub fn empty(dim: usize, labelled: bool) -> Self {
        Self {
            features: Vec::new(),
            labels: labelled.then(Vec::new),
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> Option<usize> {
        self.labels.as_ref().map(|l| l[i])
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn push(&mut self, x: &[f64], y: Option<usize>) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.is_some(), self.labels.is_some());
        self.features.extend_from_slice(x);
        if let (Some(l), Some(y)) = (&mut self.labels, y) {
            l.push(y);
        }
    }

    /// The listed samples, in the listed order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut out = Dataset::empty(self.dim, self.labels.is_some());
        for &i in indices {
            out.push(self.x(i), self.y(i));
        }
        out
    }
}
