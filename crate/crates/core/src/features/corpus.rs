//! Synthetic multi-speaker videos.
//!
//! Each speaker gets a unit-norm audio prototype and a unit-norm face
//! prototype. Every segment's maps are the prototype broadcast over the
//! spatial grid plus i.i.d. Gaussian noise. Off-screen speakers never show a
//! face. Speaker labels are only unique within a video.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{AVPairFeatures, FeatureMap};
use crate::diarization::{Diarization, Segment};
use crate::rng::{self, Rng};
use crate::{Error, Result, TimeInterval};

const MIN_SEG_S: f64 = 0.8;
const MAX_SEG_S: f64 = 3.0;
const MIN_GAP_S: f64 = 0.3;
const MAX_GAP_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerInfo {
    pub label: String,
    pub off_screen: bool,
    /// Empty when loaded from disk.
    pub audio_prototype: Vec<f64>,
    pub face_prototype: Vec<f64>,
}

/// One video: a feature pair per reference segment, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub video_id: String,
    pub speakers: Vec<SpeakerInfo>,
    pub pairs: Vec<AVPairFeatures>,
    pub reference: Diarization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub videos: Vec<Video>,
    pub noise_sigma: f64,
}

impl Corpus {
    pub fn num_pairs(&self) -> usize {
        self.videos.iter().map(|v| v.pairs.len()).sum()
    }

    /// Splits off videos by index range, keeping the noise level.
    pub fn subset(&self, range: std::ops::Range<usize>) -> Corpus {
        Corpus {
            videos: self.videos[range].to_vec(),
            noise_sigma: self.noise_sigma,
        }
    }

    /// `(c_audio, c_face, h, w)`: audio shape of the first pair, face
    /// channels of the first pair that has a face (0 if none does).
    pub fn dims(&self) -> Option<(usize, usize, usize, usize)> {
        let mut pairs = self.videos.iter().flat_map(|v| &v.pairs);
        let (ca, h, w) = pairs.next()?.audio.shape();
        let cf = self
            .videos
            .iter()
            .flat_map(|v| &v.pairs)
            .find_map(|p| p.face.as_ref())
            .map_or(0, |f| f.channels);
        Some((ca, cf, h, w))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub n_videos: usize,
    pub min_speakers: usize,
    pub max_speakers: usize,
    pub off_screen_fraction: f64,
    pub segs_per_speaker: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub c_audio: usize,
    pub c_face: usize,
    pub h: usize,
    pub w: usize,
    /// Prefix for generated video ids, e.g. `"train"` gives `train000`.
    pub video_prefix: String,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_videos: 10,
            min_speakers: 4,
            max_speakers: 8,
            off_screen_fraction: 0.25,
            segs_per_speaker: 3,
            noise_sigma: 0.1,
            seed: 0,
            c_audio: 16,
            c_face: 16,
            h: 4,
            w: 4,
            video_prefix: "vid".into(),
        }
    }
}

fn unit_gaussian(n: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Rounds through `f32` so an in-memory corpus equals its on-disk form.
fn to_f32_grid(x: f64) -> f64 {
    x as f32 as f64
}

fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn noisy_map(proto: &[f64], h: usize, w: usize, noise: Option<&Normal<f64>>, rng: &mut Rng) -> FeatureMap {
    let mut data = Vec::with_capacity(proto.len() * h * w);
    for &p in proto {
        for _ in 0..h * w {
            let n = noise.map_or(0.0, |d| d.sample(rng));
            data.push(to_f32_grid(p + n));
        }
    }
    FeatureMap::from_vec(proto.len(), h, w, data).expect("shape by construction")
}

pub fn make_synthetic_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    if spec.min_speakers < 2 || spec.max_speakers < spec.min_speakers {
        return Err(Error::InvalidArgument(format!(
            "speaker range {}..={} must start at 2 or more",
            spec.min_speakers, spec.max_speakers
        )));
    }
    if !(0.0..=1.0).contains(&spec.off_screen_fraction) {
        return Err(Error::InvalidArgument("off-screen fraction must lie in [0, 1]".into()));
    }
    if spec.n_videos == 0 || spec.segs_per_speaker == 0 {
        return Err(Error::InvalidArgument("need at least one video and one segment per speaker".into()));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument("noise sigma must be non-negative".into()));
    }
    if spec.c_audio == 0 || spec.c_face == 0 || spec.h == 0 || spec.w == 0 {
        return Err(Error::InvalidArgument("feature dimensions must be positive".into()));
    }
    let noise = (spec.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, spec.noise_sigma).expect("valid sigma"));

    let videos = (0..spec.n_videos)
        .map(|v| {
            let video_id = format!("{}{:03}", spec.video_prefix, v);
            let mut rng = rng::stream(spec.seed, rng::stream_id(&video_id));
            make_video(spec, video_id, noise.as_ref(), &mut rng)
        })
        .collect();
    Ok(Corpus {
        videos,
        noise_sigma: spec.noise_sigma,
    })
}

fn make_video(spec: &CorpusSpec, video_id: String, noise: Option<&Normal<f64>>, rng: &mut Rng) -> Video {
    let n_spk = rng.random_range(spec.min_speakers..=spec.max_speakers);
    let n_off = (spec.off_screen_fraction * n_spk as f64).round() as usize;
    let mut order: Vec<usize> = (0..n_spk).collect();
    order.shuffle(rng);
    let speakers: Vec<SpeakerInfo> = (0..n_spk)
        .map(|k| SpeakerInfo {
            label: format!("spk{k}"),
            off_screen: order[..n_off].contains(&k),
            audio_prototype: unit_gaussian(spec.c_audio, rng),
            face_prototype: unit_gaussian(spec.c_face, rng),
        })
        .collect();

    let mut turns: Vec<usize> = (0..n_spk)
        .flat_map(|k| std::iter::repeat_n(k, spec.segs_per_speaker))
        .collect();
    turns.shuffle(rng);

    let mut t = 0.0;
    let mut pairs = Vec::with_capacity(turns.len());
    let mut segments = Vec::with_capacity(turns.len());
    for k in turns {
        let onset = round_ms(t + rng.random_range(MIN_GAP_S..MAX_GAP_S));
        let offset = round_ms(onset + rng.random_range(MIN_SEG_S..MAX_SEG_S));
        t = offset;
        let interval = TimeInterval::new(onset, offset).expect("positive duration");
        let spk = &speakers[k];
        let audio = noisy_map(&spk.audio_prototype, spec.h, spec.w, noise, rng);
        let face = (!spk.off_screen).then(|| noisy_map(&spk.face_prototype, spec.h, spec.w, noise, rng));
        pairs.push(AVPairFeatures {
            audio,
            visible: face.is_some(),
            face,
            segment: interval,
            video_id: video_id.clone(),
            true_speaker: Some(spk.label.clone()),
        });
        segments.push(Segment {
            interval,
            speaker: spk.label.clone(),
        });
    }
    let reference = Diarization::from_segments(video_id.clone(), segments);
    Video {
        video_id,
        speakers,
        pairs,
        reference,
    }
}
