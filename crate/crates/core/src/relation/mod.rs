//! Pairwise relation scoring with visibility-case masks, and its training.

mod checkpoint;
mod model;
mod optim;
mod sampling;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use model::{visibility_case, ForwardCache, Layout, ModelDims, RelationModel, NUM_BLOCKS, NUM_CASES};
pub use optim::Adam;
pub use sampling::{sample_batch, PairExample, PairSampler};
pub use train::{train, TrainedScorer, ValidationPoint};

use rayon::prelude::*;

use crate::{Error, Result};

/// Mean squared error between scores and 0/1 labels.
pub fn mse_loss(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    Ok(scores
        .iter()
        .zip(labels)
        .map(|(s, y)| (s - y).powi(2))
        .sum::<f64>()
        / scores.len() as f64)
}

/// Batch loss and its gradient, laid out like the model's parameters.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub loss: f64,
    pub grad: Vec<f64>,
}

const CHUNK: usize = 4;

/// Mean-squared-error loss of `batch` and its exact gradient.
///
/// Examples are processed in fixed chunks and the partial sums added in
/// order, so the result does not depend on the thread count.
pub fn backward(batch: &[PairExample], model: &RelationModel) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let n = batch.len() as f64;
    let nparams = model.params().len();
    let partials: Vec<Result<(f64, Vec<f64>)>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; nparams];
            let mut loss = 0.0;
            for ex in chunk {
                let cache = model.forward(&ex.left, &ex.right)?;
                let err = cache.score - ex.label;
                loss += err * err;
                model.backward_into(&cache, 2.0 * err / n, &mut grad);
            }
            Ok((loss, grad))
        })
        .collect();
    let mut grad = vec![0.0; nparams];
    let mut loss = 0.0;
    for part in partials {
        let (l, g) = part?;
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok(BatchGradient { loss: loss / n, grad })
}

/// Masks as CSV: one row per visibility case, `D` columns.
pub fn masks_csv(model: &RelationModel) -> String {
    model
        .export_masks()
        .iter()
        .map(|row| {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            cells.join(",") + "\n"
        })
        .collect()
}

/// Loss only, for finite-difference checks and monitoring.
pub fn batch_loss(batch: &[PairExample], model: &RelationModel) -> Result<f64> {
    let scores = batch
        .iter()
        .map(|ex| model.score_pair(&ex.left, &ex.right))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<f64> = batch.iter().map(|ex| ex.label).collect();
    mse_loss(&scores, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untrained_masks_csv_is_ones() {
        let dims = ModelDims { c_audio: 1, c_face: 2, h: 2, w: 2 };
        let m = RelationModel::new(dims, &mut crate::rng::seeded(0));
        let csv = masks_csv(&m);
        assert_eq!(csv.lines().count(), 4);
        for line in csv.lines() {
            assert_eq!(line, ["1.000000"; 6].join(","));
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.5], &[1.0]).unwrap(), 0.25);
        assert!((mse_loss(&[0.2, 0.9], &[0.0, 1.0]).unwrap() - 0.025).abs() < 1e-15);
        assert!(mse_loss(&[], &[]).is_err());
        assert!(mse_loss(&[0.1], &[0.0, 1.0]).is_err());
    }
}
