use rand::seq::index;

use crate::codec::RealVector;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

use super::data::Dataset;
use super::task::TrainTask;

/// Runs `local_steps` minibatch gradient steps from `model` and returns
/// `w_local − model`. Each step draws `batch` samples without replacement;
/// a batch at least as large as the dataset is the full batch.
pub fn local_train(
    task: &TrainTask,
    model: &RealVector,
    data: &Dataset,
    lr: f64,
    batch: usize,
    local_steps: usize,
    rng: &mut SeededRng,
) -> Result<RealVector> {
    if model.dim() != task.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: task.param_dim(),
            found: model.dim(),
        });
    }
    if data.is_empty() {
        return Err(Error::EmptyInput("client dataset is empty"));
    }
    if !(lr.is_finite() && lr >= 0.0) || batch == 0 {
        return Err(Error::InvalidConfig(
            "lr must be >= 0 and batch positive".into(),
        ));
    }
    let mut w = model.as_slice().to_vec();
    let full: Vec<usize> = (0..data.len()).collect();
    for _ in 0..local_steps {
        let picked;
        let b = if batch >= data.len() {
            &full
        } else {
            picked = index::sample(rng, data.len(), batch).into_vec();
            &picked
        };
        let (_, g) = task.loss_and_grad(&w, data, b);
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= lr * gi;
        }
    }
    RealVector::new(w.iter().zip(model.iter()).map(|(a, b)| a - b).collect())
}
