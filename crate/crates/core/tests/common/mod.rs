//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use avdiar_core::diarization::Segment;
use avdiar_core::features::FeatureMap;
use avdiar_core::relation::{backward, batch_loss, ModelDims, PairExample, RelationModel};
use avdiar_core::rng::Rng;
use avdiar_core::{AVPairFeatures, Diarization, Linkage, SimilarityMatrix, TimeInterval};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

/// Agglomerative clustering by direct simulation: every step recomputes the
/// linkage of every cluster pair from the member lists.
pub fn ahc_oracle(s: &SimilarityMatrix, threshold: f64, linkage: Linkage) -> Vec<usize> {
    let n = s.len();
    // kept sorted by smallest member
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let vals: Vec<f64> = clusters[a]
                    .iter()
                    .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| s.get(i, j))
                    .collect();
                let v = match linkage {
                    Linkage::Average => vals.iter().sum::<f64>() / vals.len() as f64,
                    Linkage::Single => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    Linkage::Complete => vals.iter().cloned().fold(f64::INFINITY, f64::min),
                };
                if best.is_none_or(|(bv, _, _)| v > bv) {
                    best = Some((v, a, b));
                }
            }
        }
        match best {
            Some((v, a, b)) if v >= threshold => {
                let moved = clusters.remove(b);
                clusters[a].extend(moved);
                clusters[a].sort_unstable();
            }
            _ => break,
        }
    }
    let mut labels = vec![0; n];
    for (k, c) in clusters.iter().enumerate() {
        for &i in c {
            labels[i] = k;
        }
    }
    labels
}

fn ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

/// Up to `max_speakers` speakers with 1-6 segments each inside
/// `[0, duration]`, on a millisecond grid; overlaps allowed.
pub fn random_diarization(rng: &mut Rng, file: &str, max_speakers: usize, duration: f64, prefix: &str) -> Diarization {
    let n = rng.random_range(1..=max_speakers);
    let mut segs = Vec::new();
    for k in 0..n {
        for _ in 0..rng.random_range(1..=6) {
            let on = ms(rng.random_range(0.0..duration - 0.3));
            let off = ms((on + rng.random_range(0.2..8.0)).min(duration));
            if off > on {
                segs.push(Segment {
                    interval: TimeInterval::new(on, off).unwrap(),
                    speaker: format!("{prefix}{k}"),
                });
            }
        }
    }
    Diarization::from_segments(file, segs)
}

/// A system-like hypothesis: the reference with jittered boundaries, some
/// segments dropped or relabelled, plus a few spurious segments.
pub fn perturbed_hypothesis(rng: &mut Rng, reference: &Diarization, max_speakers: usize, duration: f64) -> Diarization {
    let spk = reference.speakers();
    let relabel: Vec<usize> = (0..spk.len()).map(|_| rng.random_range(0..max_speakers)).collect();
    let mut segs = Vec::new();
    for s in &reference.segments {
        if rng.random_bool(0.15) {
            continue;
        }
        let k = spk.iter().position(|x| *x == s.speaker).unwrap();
        let label = if rng.random_bool(0.2) { rng.random_range(0..max_speakers) } else { relabel[k] };
        let on = ms((s.interval.onset() + rng.random_range(-0.4..0.4)).max(0.0));
        let off = ms((s.interval.offset() + rng.random_range(-0.4..0.4)).min(duration));
        if off > on {
            segs.push(Segment {
                interval: TimeInterval::new(on, off).unwrap(),
                speaker: format!("h{label}"),
            });
        }
    }
    for _ in 0..rng.random_range(0..4) {
        let on = ms(rng.random_range(0.0..duration - 0.3));
        let off = ms((on + rng.random_range(0.2..3.0)).min(duration));
        if off > on {
            segs.push(Segment {
                interval: TimeInterval::new(on, off).unwrap(),
                speaker: format!("h{}", rng.random_range(0..max_speakers)),
            });
        }
    }
    Diarization::from_segments(reference.file_id.clone(), segs)
}

fn random_map(c: usize, h: usize, w: usize, rng: &mut Rng) -> FeatureMap {
    FeatureMap::from_vec(c, h, w, (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// A candidate with an audio map larger than the model grid, so adaptive
/// pooling is on the path.
pub fn random_candidate(dims: &ModelDims, visible: bool, rng: &mut Rng) -> AVPairFeatures {
    AVPairFeatures {
        audio: random_map(dims.c_audio, dims.h + 2, dims.w + 2, rng),
        face: visible.then(|| random_map(dims.c_face, dims.h, dims.w, rng)),
        visible,
        segment: TimeInterval::new(0.0, 2.0).unwrap(),
        video_id: "v".into(),
        true_speaker: None,
    }
}

/// He-initialized model with every other parameter group randomized too,
/// so masks, biases and the head all carry non-trivial gradients.
pub fn random_model(dims: ModelDims, rng: &mut Rng) -> RelationModel {
    let mut m = RelationModel::new(dims, rng);
    let layout = m.layout();
    let small = Normal::new(0.0, 0.1).unwrap();
    let unit = Normal::new(0.0, 1.0).unwrap();
    let p = m.params_mut();
    for v in &mut p[layout.masks()] {
        *v = rng.random_range(0.5..1.5);
    }
    for b in 0..avdiar_core::relation::NUM_BLOCKS {
        for l in 0..2 {
            for v in &mut p[layout.conv_bias(b, l)] {
                *v = small.sample(rng);
            }
        }
    }
    for v in &mut p[layout.head_weight()] {
        *v = unit.sample(rng);
    }
    p[layout.head_bias()] = small.sample(rng);
    m
}

/// Batch covering all four visibility cases, with random labels.
pub fn random_batch(dims: &ModelDims, n: usize, rng: &mut Rng) -> Vec<PairExample> {
    (0..n)
        .map(|k| {
            let case = k % 4;
            PairExample {
                left: random_candidate(dims, case & 2 != 0, rng),
                right: random_candidate(dims, case & 1 != 0, rng),
                label: rng.random_range(0..2) as f64,
            }
        })
        .collect()
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinates whose perturbation flips a ReLU, where the loss is not
    /// differentiable and central differences are meaningless.
    pub skipped: usize,
}

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, for coordinates whose gradient
/// is zero or below the finite-difference noise level.
pub const REL_FLOOR: f64 = 1e-6;

fn patterns(m: &RelationModel, batch: &[PairExample]) -> Vec<Vec<bool>> {
    batch.iter().map(|e| m.relu_pattern(&e.left, &e.right).unwrap()).collect()
}

/// Compares the analytic gradient with central differences on every
/// parameter.
pub fn gradient_check(model: &RelationModel, batch: &[PairExample]) -> GradCheck {
    let analytic = backward(batch, model).unwrap().grad;
    let base = patterns(model, batch);
    let mut m = model.clone();
    let mut out = GradCheck { max_rel_err: 0.0, checked: 0, skipped: 0 };
    for (k, &a) in analytic.iter().enumerate() {
        let orig = m.params()[k];
        m.params_mut()[k] = orig + FD_STEP;
        let (lp, pp) = (batch_loss(batch, &m).unwrap(), patterns(&m, batch));
        m.params_mut()[k] = orig - FD_STEP;
        let (lm, pm) = (batch_loss(batch, &m).unwrap(), patterns(&m, batch));
        m.params_mut()[k] = orig;
        if pp != base || pm != base {
            out.skipped += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * FD_STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        out.max_rel_err = out.max_rel_err.max(rel);
        out.checked += 1;
    }
    out
}
