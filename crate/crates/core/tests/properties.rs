//! Cross-module properties of the audio front end, the relation model,
//! training and scoring.

mod common;

use std::f64::consts::PI;

use avdiar_core::audio::{energy_vad, AudioSignal};
use avdiar_core::diarization::Segment;
use avdiar_core::features::{make_synthetic_corpus, CorpusSpec};
use avdiar_core::pipeline::evaluate_corpus;
use avdiar_core::relation::{backward, train, visibility_case, ModelDims, PairExample, RelationModel, NUM_CASES};
use avdiar_core::rng;
use avdiar_core::{compute_der, Config, Diarization};
use proptest::prelude::*;
use rand::Rng as _;

use common::*;

fn tones(parts: &[(bool, f64)]) -> AudioSignal {
    let mut samples = Vec::new();
    for &(on, secs) in parts {
        let n = (secs * 16_000.0).round() as usize;
        let base = samples.len();
        samples.extend((0..n).map(|i| {
            if on {
                0.5 * (2.0 * PI * 440.0 * (base + i) as f64 / 16_000.0).sin()
            } else {
                0.0
            }
        }));
    }
    AudioSignal::new(samples, 16_000).unwrap()
}

#[test]
fn vad_splits_tones_around_silence() {
    let cfg = Config {
        vad_bridge_s: 0.0,
        ..Config::default()
    };
    let out = energy_vad(&tones(&[(true, 1.0), (false, 1.0), (true, 1.0)]), &cfg);
    assert_eq!(out.len(), 2, "{out:?}");
    let near = |a: f64, b: f64| (a - b).abs() <= 0.05;
    assert!(near(out[0].onset(), 0.0) && near(out[0].offset(), 1.0), "{out:?}");
    assert!(near(out[1].onset(), 2.0) && near(out[1].offset(), 3.0), "{out:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vad_output_is_sorted_disjoint_and_inside(parts in prop::collection::vec((any::<bool>(), 1u32..15), 1..6)) {
        let parts: Vec<(bool, f64)> = parts.into_iter().map(|(on, d)| (on, d as f64 / 10.0)).collect();
        let sig = tones(&parts);
        let out = energy_vad(&sig, &Config::default());
        for iv in &out {
            prop_assert!(iv.onset() >= 0.0 && iv.offset() <= sig.duration() + 1e-9);
        }
        for w in out.windows(2) {
            prop_assert!(w[0].offset() < w[1].onset());
        }
    }

    #[test]
    fn der_is_invariant_to_renaming(seed in 0u64..1000) {
        let mut r = rng::seeded(seed);
        let reference = random_diarization(&mut r, "f", 4, 20.0, "r");
        let hyp = perturbed_hypothesis(&mut r, &reference, 4, 20.0);
        let rename = |d: &Diarization, tag: &str| Diarization::from_segments(
            d.file_id.clone(),
            d.segments.iter().map(|s| Segment { interval: s.interval, speaker: format!("{tag}{}", s.speaker.len() * 7 + s.speaker.bytes().map(usize::from).sum::<usize>()) }).collect(),
        );
        let base = compute_der(&reference, &hyp, 0.25, true);
        let renamed = compute_der(&rename(&reference, "x"), &rename(&hyp, "y"), 0.25, true);
        match (base, renamed) {
            (Ok(a), Ok(b)) => prop_assert!((a.der_pct - b.der_pct).abs() < 1e-9),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }
}

fn dims() -> ModelDims {
    ModelDims {
        c_audio: 2,
        c_face: 2,
        h: 3,
        w: 3,
    }
}

#[test]
fn scores_are_strictly_inside_unit_interval() {
    let mut r = rng::seeded(3);
    for _ in 0..20 {
        let m = random_model(dims(), &mut r);
        for ex in random_batch(&dims(), 8, &mut r) {
            let s = m.score_pair(&ex.left, &ex.right).unwrap();
            assert!(s > 0.0 && s < 1.0, "{s}");
        }
    }
}

#[test]
fn a_case_mask_only_affects_its_own_case() {
    let mut r = rng::seeded(4);
    let m = random_model(dims(), &mut r);
    let batch = random_batch(&dims(), 16, &mut r);
    let layout = m.layout();
    for case in 0..NUM_CASES {
        let mut p = m.params().to_vec();
        for v in &mut p[layout.mask(case)] {
            *v += r.random_range(0.5..1.0);
        }
        let changed = RelationModel::from_params(dims(), p).unwrap();
        for ex in &batch {
            let (a, b) = (m.score_pair(&ex.left, &ex.right).unwrap(), changed.score_pair(&ex.left, &ex.right).unwrap());
            if visibility_case(&ex.left, &ex.right) == case {
                assert_ne!(a, b);
            } else {
                assert_eq!(a, b);
            }
        }
    }
}

#[test]
fn hidden_faces_do_not_influence_scores() {
    let mut r = rng::seeded(5);
    let m = random_model(dims(), &mut r);
    for ex in random_batch(&dims(), 16, &mut r) {
        let base = m.score_pair(&ex.left, &ex.right).unwrap();
        let mut left = ex.left.clone();
        let mut right = ex.right.clone();
        for side in [&mut left, &mut right] {
            if !side.visible {
                side.face = Some(random_candidate(&dims(), true, &mut r).face.unwrap());
            }
        }
        assert_eq!(base, m.score_pair(&left, &right).unwrap());
    }
}

#[test]
fn zero_loss_batch_has_zero_gradient() {
    let mut r = rng::seeded(6);
    let mut m = random_model(dims(), &mut r);
    let layout = m.layout();
    // a zero head pins every score to sigmoid(0) = 0.5
    let p = m.params_mut();
    p[layout.head_weight()].fill(0.0);
    p[layout.head_bias()] = 0.0;
    let batch: Vec<PairExample> = random_batch(&dims(), 8, &mut r)
        .into_iter()
        .map(|ex| PairExample { label: 0.5, ..ex })
        .collect();
    let g = backward(&batch, &m).unwrap();
    assert_eq!(g.loss, 0.0);
    assert!(g.grad.iter().all(|&v| v == 0.0));
}

/// Full-length run on a noise-free corpus with a small model.
#[test]
fn noise_free_training_converges_and_recovers_speakers() {
    let spec = |n, seed, prefix: &str| CorpusSpec {
        n_videos: n,
        min_speakers: 2,
        max_speakers: 4,
        noise_sigma: 0.0,
        seed,
        c_audio: 4,
        c_face: 4,
        h: 2,
        w: 2,
        video_prefix: prefix.into(),
        ..CorpusSpec::default()
    };
    let tr = make_synthetic_corpus(&spec(16, 21, "train")).unwrap();
    let va = make_synthetic_corpus(&spec(3, 22, "val")).unwrap();
    let te = make_synthetic_corpus(&spec(4, 23, "test")).unwrap();
    let cfg = Config {
        c_audio: 4,
        c_face: 4,
        h: 2,
        w: 2,
        ..Config::default()
    };
    let t = train(&tr, &va, &cfg).unwrap();
    assert_eq!(t.training_log.len(), 2000);

    let means: Vec<f64> = t
        .training_log
        .chunks(100)
        .map(|w| w.iter().map(|(_, l)| l).sum::<f64>() / w.len() as f64)
        .collect();
    // Non-increasing until converged; afterwards minibatch noise at the floor
    // may wiggle, but the loss must stay converged.
    const CONVERGED: f64 = 0.05;
    let k = means.iter().position(|&m| m < CONVERGED).expect("converges");
    for w in means[..=k].windows(2) {
        assert!(w[1] <= w[0], "smoothed loss rose before converging: {means:?}");
    }
    assert!(means[k..].iter().all(|&m| m < CONVERGED), "{means:?}");

    for v in &te.videos {
        for (i, a) in v.pairs.iter().enumerate() {
            for b in &v.pairs[i + 1..] {
                if a.true_speaker == b.true_speaker {
                    assert!(t.model.score_pair(a, b).unwrap() > 0.5);
                }
            }
        }
    }
    let eval = evaluate_corpus(&te, &t.model, t.threshold, &cfg, 0.0, cfg.seed).unwrap();
    assert_eq!(eval.total.der_pct, 0.0);
}
