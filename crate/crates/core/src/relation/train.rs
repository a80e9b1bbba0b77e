//! Adam training on sampled pairs with validation-driven model and threshold
//! selection.

use std::collections::BTreeSet;

use super::{backward, Adam, ModelDims, PairSampler, RelationModel};
use crate::features::{apply_missing_augmentation, Corpus};
use crate::pipeline::threshold_sweep;
use crate::rng;
use crate::{Config, Error, Result};

/// Corpus DER of one snapshot at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationPoint {
    pub iteration: usize,
    pub threshold: f64,
    pub der_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedScorer {
    pub model: RelationModel,
    pub threshold: f64,
    /// Iteration of the selected snapshot.
    pub iteration: usize,
    /// `(iteration, batch loss before the update)`.
    pub training_log: Vec<(usize, f64)>,
    pub validation_log: Vec<ValidationPoint>,
}

impl TrainedScorer {
    pub fn training_log_csv(&self) -> String {
        let mut s = String::from("iteration,loss\n");
        for (it, loss) in &self.training_log {
            s.push_str(&format!("{it},{loss:.9}\n"));
        }
        s
    }

    pub fn validation_log_csv(&self) -> String {
        let mut s = String::from("iteration,threshold,der_pct\n");
        for p in &self.validation_log {
            s.push_str(&format!("{},{:.4},{:.4}\n", p.iteration, p.threshold, p.der_pct));
        }
        s
    }
}

fn check_dims(corpus: &Corpus, dims: ModelDims, name: &str) -> Result<()> {
    match corpus.dims() {
        Some((ca, cf, h, w)) if (ca, cf) == (dims.c_audio, dims.c_face) && ca > 0 && h >= dims.h && w >= dims.w => {
            Ok(())
        }
        Some(found) => Err(Error::DimMismatch(format!(
            "{name} corpus has (c_audio, c_face, h, w) = {found:?}, config expects {:?}",
            (dims.c_audio, dims.c_face, dims.h, dims.w)
        ))),
        None => Err(Error::InvalidArgument(format!("{name} corpus has no pairs"))),
    }
}

/// Among thresholds tied at the best DER, the lower median.
fn pick_threshold(grid: &[f64], ders: &[f64]) -> (f64, f64) {
    let best = ders.iter().cloned().fold(f64::INFINITY, f64::min);
    let tied: Vec<f64> = grid
        .iter()
        .zip(ders)
        .filter(|(_, &d)| d == best)
        .map(|(&t, _)| t)
        .collect();
    (tied[(tied.len() - 1) / 2], best)
}

/// Trains for `cfg.iterations` Adam steps. Every `cfg.eval_every` steps and
/// after the last one, the model is evaluated on `val` over the threshold
/// grid; the snapshot and threshold with the lowest validation DER are
/// returned, later snapshots winning ties.
pub fn train(train: &Corpus, val: &Corpus, cfg: &Config) -> Result<TrainedScorer> {
    cfg.validate()?;
    let dims = ModelDims::from_config(cfg);
    check_dims(train, dims, "training")?;
    check_dims(val, dims, "validation")?;
    let train_ids: BTreeSet<&str> = train.videos.iter().map(|v| v.video_id.as_str()).collect();
    if let Some(v) = val.videos.iter().find(|v| train_ids.contains(v.video_id.as_str())) {
        return Err(Error::InvalidArgument(format!(
            "video {} is in both training and validation corpora",
            v.video_id
        )));
    }
    let sampler = PairSampler::new(train)?;

    let mut model = RelationModel::new(dims, &mut rng::stream(cfg.seed, rng::stream_id("init")));
    let mut adam = Adam::new(model.params().len(), cfg.lr);
    let mut batch_rng = rng::stream(cfg.seed, rng::stream_id("batches"));
    let mut aug_rng = rng::stream(cfg.seed, rng::stream_id("augment"));

    let mut training_log = Vec::with_capacity(cfg.iterations);
    let mut validation_log = Vec::new();
    let mut best: Option<(f64, usize, f64, RelationModel)> = None;

    let mut validate = |model: &RelationModel, iteration: usize, log: &mut Vec<ValidationPoint>| -> Result<()> {
        let ders: Vec<f64> = threshold_sweep(val, model, &cfg.threshold_grid, cfg, cfg.seed)?
            .iter()
            .map(|d| d.der_pct)
            .collect();
        log.extend(cfg.threshold_grid.iter().zip(&ders).map(|(&threshold, &der_pct)| ValidationPoint {
            iteration,
            threshold,
            der_pct,
        }));
        let (threshold, der) = pick_threshold(&cfg.threshold_grid, &ders);
        log::info!("iteration {iteration}: validation DER {der:.2}% at threshold {threshold:.2}");
        if best.as_ref().is_none_or(|b| der <= b.0) {
            best = Some((der, iteration, threshold, model.clone()));
        }
        Ok(())
    };

    for it in 1..=cfg.iterations {
        let mut batch = sampler.sample(cfg.batch_size, &mut batch_rng);
        for ex in &mut batch {
            ex.left = apply_missing_augmentation(&ex.left, cfg.missing_prob, &mut aug_rng);
            ex.right = apply_missing_augmentation(&ex.right, cfg.missing_prob, &mut aug_rng);
        }
        let g = backward(&batch, &model)?;
        training_log.push((it, g.loss));
        adam.step(model.params_mut(), &g.grad);
        if it % cfg.eval_every == 0 || it == cfg.iterations {
            log::debug!("iteration {it}: loss {:.5}", g.loss);
            validate(&model, it, &mut validation_log)?;
        }
    }
    if cfg.iterations == 0 {
        validate(&model, 0, &mut validation_log)?;
    }
    let (_, iteration, threshold, model) = best.expect("at least one validation pass");
    Ok(TrainedScorer {
        model,
        threshold,
        iteration,
        training_log,
        validation_log,
    })
}
