//! Learning tasks: the loss `ℓ(w; z)`, its gradient, prediction and the
//! evaluation metrics.
//!
//! Classification models are linear: `C` rows of `f` weights followed by a
//! bias, so `w` has `C·(f + 1)` entries and scores are `s_c = ⟨w_c, x⟩ + b_c`.
//! The Gaussian-mean task has no labels; its model is a point `w ∈ R^f` and
//! each sample contributes `½‖w − x‖²`.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::attacks::Trigger;
use crate::codec::RealVector;
use crate::error::{Error, Result};
use crate::rng::{Purpose, SeededRng};

use super::data::Dataset;
use super::idx;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    /// `½‖s − t‖²`, with `t` the one-hot label (classification) or the
    /// sample itself (Gaussian mean).
    Squared,
    /// `−log softmax(s)_y`.
    CrossEntropy,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TaskKind {
    GaussianMean,
    /// Gaussian class clusters around random class means.
    SyntheticLogistic {
        separation: f64,
        noise: f64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

/// How to build a [`TrainTask`].
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub feature_dim: usize,
    pub classes: usize,
    pub loss: Loss,
    pub train_samples: usize,
    pub test_samples: usize,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::InvalidTask("feature_dim must be positive".into()));
        }
        match &self.kind {
            TaskKind::GaussianMean => {
                if self.loss != Loss::Squared {
                    return Err(Error::InvalidTask(
                        "gaussian-mean uses the squared loss".into(),
                    ));
                }
            }
            TaskKind::SyntheticLogistic { separation, noise } => {
                if self.classes < 2 {
                    return Err(Error::InvalidTask(
                        "classification needs classes >= 2".into(),
                    ));
                }
                if !(separation.is_finite()
                    && *separation > 0.0
                    && noise.is_finite()
                    && *noise >= 0.0)
                {
                    return Err(Error::InvalidTask(
                        "separation > 0 and noise >= 0 required".into(),
                    ));
                }
                if self.train_samples == 0 || self.test_samples == 0 {
                    return Err(Error::InvalidTask("sample counts must be positive".into()));
                }
            }
            TaskKind::Idx { .. } => {
                if self.classes < 2 {
                    return Err(Error::InvalidTask(
                        "classification needs classes >= 2".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn build(&self, seed: u64) -> Result<TrainTask> {
        self.validate()?;
        let f = self.feature_dim;
        let (train, test) = match &self.kind {
            TaskKind::GaussianMean => (Dataset::empty(f, false), Dataset::empty(f, false)),
            TaskKind::SyntheticLogistic { separation, noise } => {
                let mut rng = SeededRng::for_purpose(seed, Purpose::Data, &[0]);
                let centre = Normal::new(0.0, *separation).expect("validated");
                let means: Vec<Vec<f64>> = (0..self.classes)
                    .map(|_| (0..f).map(|_| centre.sample(&mut rng)).collect())
                    .collect();
                let spread = Normal::new(0.0, *noise).expect("validated");
                let draw = |count: usize, rng: &mut SeededRng| {
                    let mut labels: Vec<usize> = (0..count).map(|i| i % self.classes).collect();
                    labels.shuffle(rng);
                    let mut d = Dataset::empty(f, true);
                    let mut x = vec![0.0; f];
                    for &y in &labels {
                        for (xi, m) in x.iter_mut().zip(&means[y]) {
                            *xi = m + spread.sample(rng);
                        }
                        d.push(&x, Some(y));
                    }
                    d
                };
                let train = draw(self.train_samples, &mut rng);
                let test = draw(self.test_samples, &mut rng);
                (train, test)
            }
            TaskKind::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => {
                let train = idx::load_idx(train_images, train_labels)?;
                let test = idx::load_idx(test_images, test_labels)?;
                if train.dim() != f || test.dim() != f {
                    return Err(Error::InvalidTask(format!(
                        "idx feature dimension {} does not match feature_dim {f}",
                        train.dim()
                    )));
                }
                let max_label = train
                    .labels()
                    .into_iter()
                    .chain(test.labels())
                    .flatten()
                    .max();
                if max_label.is_some_and(|&y| y >= self.classes) {
                    return Err(Error::InvalidTask("idx label exceeds classes".into()));
                }
                (train, test)
            }
        };
        Ok(TrainTask {
            kind: self.kind.clone(),
            feature_dim: f,
            classes: if self.kind == TaskKind::GaussianMean {
                0
            } else {
                self.classes
            },
            loss: self.loss,
            train,
            test,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTask {
    pub kind: TaskKind,
    pub feature_dim: usize,
    /// Zero for the unlabelled Gaussian-mean task.
    pub classes: usize,
    pub loss: Loss,
    pub train: Dataset,
    pub test: Dataset,
}

fn softmax_in_place(s: &mut [f64]) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in s.iter_mut() {
        *v = (*v - max).exp();
        z += *v;
    }
    s.iter_mut().for_each(|v| *v /= z);
}

impl TrainTask {
    pub fn is_classification(&self) -> bool {
        self.classes > 0
    }

    pub fn param_dim(&self) -> usize {
        if self.is_classification() {
            self.classes * (self.feature_dim + 1)
        } else {
            self.feature_dim
        }
    }

    pub fn init_model(&self) -> RealVector {
        RealVector::zeros(self.param_dim())
    }

    fn scores(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        let f = self.feature_dim;
        for (c, s) in out.iter_mut().enumerate() {
            let row = &w[c * (f + 1)..(c + 1) * (f + 1)];
            *s = row[..f].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + row[f];
        }
    }

    /// Per-sample loss and gradient with respect to the scores, written to
    /// `ds`.
    fn score_loss(&self, s: &[f64], y: usize, ds: &mut [f64]) -> f64 {
        match self.loss {
            Loss::Squared => {
                let mut l = 0.0;
                for (c, (g, &v)) in ds.iter_mut().zip(s).enumerate() {
                    let r = v - if c == y { 1.0 } else { 0.0 };
                    *g = r;
                    l += 0.5 * r * r;
                }
                l
            }
            Loss::CrossEntropy => {
                ds.copy_from_slice(s);
                softmax_in_place(ds);
                let l = -ds[y].max(f64::MIN_POSITIVE).ln();
                ds[y] -= 1.0;
                l
            }
        }
    }

    /// Mean loss and gradient over the listed samples of `data`.
    pub fn loss_and_grad(&self, w: &[f64], data: &Dataset, batch: &[usize]) -> (f64, Vec<f64>) {
        assert_eq!(w.len(), self.param_dim());
        let mut grad = vec![0.0; w.len()];
        if batch.is_empty() {
            return (0.0, grad);
        }
        let mut loss = 0.0;
        let f = self.feature_dim;
        if !self.is_classification() {
            for &i in batch {
                for ((g, wi), xi) in grad.iter_mut().zip(w).zip(data.x(i)) {
                    let r = wi - xi;
                    *g += r;
                    loss += 0.5 * r * r;
                }
            }
        } else {
            let mut s = vec![0.0; self.classes];
            let mut ds = vec![0.0; self.classes];
            for &i in batch {
                let x = data.x(i);
                let y = data.y(i).expect("classification data is labelled");
                self.scores(w, x, &mut s);
                loss += self.score_loss(&s, y, &mut ds);
                for (c, &g) in ds.iter().enumerate() {
                    let row = &mut grad[c * (f + 1)..(c + 1) * (f + 1)];
                    for (r, xi) in row[..f].iter_mut().zip(x) {
                        *r += g * xi;
                    }
                    row[f] += g;
                }
            }
        }
        let k = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= k);
        (loss / k, grad)
    }

    pub fn predict(&self, w: &[f64], x: &[f64]) -> usize {
        let mut s = vec![0.0; self.classes];
        self.scores(w, x, &mut s);
        let mut best = 0;
        for (c, &v) in s.iter().enumerate() {
            if v > s[best] {
                best = c;
            }
        }
        best
    }

    /// Argmax accuracy on `test`.
    pub fn evaluate(&self, w: &[f64], test: &Dataset) -> Result<f64> {
        if !self.is_classification() {
            return Err(Error::InvalidTask(
                "accuracy needs a classification task".into(),
            ));
        }
        if test.is_empty() {
            return Err(Error::EmptyInput("test set is empty"));
        }
        let hits = (0..test.len())
            .filter(|&i| Some(self.predict(w, test.x(i))) == test.y(i))
            .count();
        Ok(hits as f64 / test.len() as f64)
    }

    /// Fraction of trigger-stamped test samples, restricted to those whose
    /// true label differs from the target, classified as the target.
    pub fn attack_success_rate(&self, w: &[f64], test: &Dataset, trigger: &Trigger) -> Result<f64> {
        if !self.is_classification() {
            return Err(Error::InvalidTask("ASR needs a classification task".into()));
        }
        let mut total = 0usize;
        let mut hits = 0usize;
        let mut x = vec![0.0; test.dim()];
        for i in 0..test.len() {
            if test.y(i) == Some(trigger.target_label) {
                continue;
            }
            x.copy_from_slice(test.x(i));
            trigger.stamp(&mut x);
            total += 1;
            hits += usize::from(self.predict(w, &x) == trigger.target_label);
        }
        if total == 0 {
            return Err(Error::EmptyInput(
                "no triggered samples outside the target class",
            ));
        }
        Ok(hits as f64 / total as f64)
    }
}
