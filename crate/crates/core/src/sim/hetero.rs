//! Heterogeneous client data: every client draws from one of `k` component
//! distributions via an assignment map `φ`.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::codec::RealVector;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

use super::data::Dataset;
use super::task::TrainTask;

#[derive(Clone, Debug, PartialEq)]
pub enum HeterogeneitySpec {
    /// Classification: a uniform random split of the training set.
    /// Gaussian mean: every client samples `N(0, I)`.
    Iid,
    /// Classification only: every client holds equal counts of exactly
    /// `per_client` labels.
    Labels { per_client: usize },
    /// Gaussian mean only: client `j` samples `N(μ_φ(j), σ_φ(j)² I)`. The
    /// default map is `φ(j) = j mod k`.
    Components {
        means: Vec<RealVector>,
        stddevs: Vec<f64>,
        phi: Option<Vec<usize>>,
    },
}

impl HeterogeneitySpec {
    pub fn hetero_k(&self) -> usize {
        match self {
            HeterogeneitySpec::Components { means, .. } => means.len(),
            _ => 1,
        }
    }

    pub fn validate(&self, task: &TrainTask, n: usize) -> Result<()> {
        match self {
            HeterogeneitySpec::Iid => Ok(()),
            HeterogeneitySpec::Labels { per_client } => {
                if !task.is_classification() {
                    return Err(Error::InvalidTask(
                        "label mode needs a classification task".into(),
                    ));
                }
                if *per_client == 0 || *per_client > task.classes {
                    return Err(Error::InvalidTask(format!(
                        "labels per client {per_client} must lie in 1..={}",
                        task.classes
                    )));
                }
                Ok(())
            }
            HeterogeneitySpec::Components {
                means,
                stddevs,
                phi,
            } => {
                if task.is_classification() {
                    return Err(Error::InvalidTask(
                        "component mode needs the gaussian-mean task".into(),
                    ));
                }
                if means.is_empty() || means.len() != stddevs.len() {
                    return Err(Error::InvalidTask(
                        "need hetero_k >= 1 means and as many stddevs".into(),
                    ));
                }
                if means.iter().any(|m| m.dim() != task.feature_dim) {
                    return Err(Error::InvalidTask(
                        "component mean dimension mismatch".into(),
                    ));
                }
                if stddevs.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return Err(Error::InvalidTask("stddevs must be non-negative".into()));
                }
                if let Some(phi) = phi {
                    if phi.len() != n || phi.iter().any(|&c| c >= means.len()) {
                        return Err(Error::InvalidTask(
                            "phi must map every client to a component".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// Component index of each client (all zero outside component mode).
    pub fn phi(&self, n: usize) -> Vec<usize> {
        match self {
            HeterogeneitySpec::Components { means, phi, .. } => phi
                .clone()
                .unwrap_or_else(|| (0..n).map(|j| j % means.len()).collect()),
            _ => vec![0; n],
        }
    }
}

/// Builds the local dataset of every client. `samples_per_client` applies to
/// the Gaussian-mean task; classification tasks split their training set.
pub fn assign_heterogeneous(
    task: &TrainTask,
    spec: &HeterogeneitySpec,
    n: usize,
    samples_per_client: usize,
    rng: &mut SeededRng,
) -> Result<Vec<Dataset>> {
    if n == 0 {
        return Err(Error::InvalidTask("need at least one client".into()));
    }
    spec.validate(task, n)?;
    if !task.is_classification() {
        if samples_per_client == 0 {
            return Err(Error::InvalidTask(
                "samples_per_client must be positive".into(),
            ));
        }
        let (means, stddevs) = match spec {
            HeterogeneitySpec::Components { means, stddevs, .. } => {
                (means.clone(), stddevs.clone())
            }
            _ => (vec![RealVector::zeros(task.feature_dim)], vec![1.0]),
        };
        let phi = spec.phi(n);
        let mut x = vec![0.0; task.feature_dim];
        return Ok(phi
            .iter()
            .map(|&c| {
                let noise = Normal::new(0.0, stddevs[c]).expect("validated");
                let mut d = Dataset::empty(task.feature_dim, false);
                for _ in 0..samples_per_client {
                    for (xi, m) in x.iter_mut().zip(means[c].iter()) {
                        *xi = m + noise.sample(rng);
                    }
                    d.push(&x, None);
                }
                d
            })
            .collect());
    }

    let train = &task.train;
    match spec {
        HeterogeneitySpec::Labels { per_client } => {
            let classes = task.classes;
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let label_sets: Vec<Vec<usize>> = (0..n)
                .map(|slot| {
                    (0..*per_client)
                        .map(|t| (slot * per_client + t) % classes)
                        .collect()
                })
                .collect();
            let mut demand = vec![0usize; classes];
            label_sets.iter().flatten().for_each(|&c| demand[c] += 1);
            let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
            for i in 0..train.len() {
                pools[train.y(i).expect("labelled")].push(i);
            }
            pools.iter_mut().for_each(|p| p.shuffle(rng));
            let per_label = (0..classes)
                .filter(|&c| demand[c] > 0)
                .map(|c| pools[c].len() / demand[c])
                .min()
                .unwrap_or(0);
            if per_label == 0 {
                return Err(Error::InvalidTask(format!(
                    "label demand of {n} clients x {per_client} labels exceeds the training set"
                )));
            }
            let mut next = vec![0usize; classes];
            let mut out = vec![Dataset::empty(train.dim(), true); n];
            for (slot, labels) in label_sets.iter().enumerate() {
                let mut idx = Vec::with_capacity(per_label * labels.len());
                for &c in labels {
                    idx.extend_from_slice(&pools[c][next[c]..next[c] + per_label]);
                    next[c] += per_label;
                }
                idx.shuffle(rng);
                out[order[slot]] = train.subset(&idx);
            }
            Ok(out)
        }
        _ => {
            let per = train.len() / n;
            if per == 0 {
                return Err(Error::InvalidTask(
                    "fewer training samples than clients".into(),
                ));
            }
            let mut idx: Vec<usize> = (0..train.len()).collect();
            idx.shuffle(rng);
            Ok(idx
                .chunks_exact(per)
                .take(n)
                .map(|c| train.subset(c))
                .collect())
        }
    }
}
