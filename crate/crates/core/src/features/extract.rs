use rand::Rng as _;

use super::map::bucket;
use super::{AVPairFeatures, FeatureMap, Video};
use crate::audio::{compute_spectrogram, AudioSignal};
use crate::rng::Rng;
use crate::{Config, Error, Result, TimeInterval};

/// Produces the features of one analysis window.
pub trait PairExtractor {
    fn extract(&self, window: &TimeInterval, rng: &mut Rng) -> Result<AVPairFeatures>;
}

pub fn extract_pair_features(
    window: &TimeInterval,
    extractor: &dyn PairExtractor,
    rng: &mut Rng,
) -> Result<AVPairFeatures> {
    extractor.extract(window, rng)
}

/// Reads features straight from a corpus video: a window takes the pair of
/// the reference segment it overlaps most.
pub struct SyntheticExtractor<'a> {
    pub video: &'a Video,
}

impl PairExtractor for SyntheticExtractor<'_> {
    fn extract(&self, window: &TimeInterval, _rng: &mut Rng) -> Result<AVPairFeatures> {
        let mut best: Option<(&AVPairFeatures, f64)> = None;
        for p in &self.video.pairs {
            let ov = p.segment.overlap(window);
            if ov > best.map_or(0.0, |b| b.1) {
                best = Some((p, ov));
            }
        }
        let (pair, _) = best.ok_or_else(|| Error::SegmentOutOfRange {
            onset: window.onset(),
            offset: window.offset(),
            duration: self.video.pairs.last().map_or(0.0, |p| p.segment.offset()),
        })?;
        Ok(AVPairFeatures {
            segment: *window,
            ..pair.clone()
        })
    }
}

/// A face feature map observed at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceObservation {
    pub time: f64,
    pub map: FeatureMap,
}

/// Pools the window's log spectrogram into a `c x h x w` map: frequency is
/// split into `c * h` bands (band `c * h + i` feeds cell `(c, i, .)`) and time
/// into `w` spans. Faces, if any, come from observations inside the window,
/// one picked uniformly.
pub struct SpectrogramStatExtractor<'a> {
    pub audio: &'a AudioSignal,
    pub faces: &'a [FaceObservation],
    pub cfg: &'a Config,
    pub video_id: &'a str,
}

impl SpectrogramStatExtractor<'_> {
    pub fn pool(&self, window: &TimeInterval) -> Result<FeatureMap> {
        let seg = self.audio.slice(window)?;
        let spec = compute_spectrogram(&seg, self.cfg)?;
        let (c, h, w) = (self.cfg.c_audio, self.cfg.h, self.cfg.w);
        let (frames, bins) = (spec.num_frames(), spec.num_bins());
        if bins < c * h || frames < w {
            return Err(Error::DimMismatch(format!(
                "{frames}x{bins} spectrogram cannot fill a {c}x{h}x{w} grid"
            )));
        }
        let mut data = vec![0.0; c * h * w];
        for band in 0..c * h {
            let (f0, f1) = bucket(band, c * h, bins);
            for j in 0..w {
                let (t0, t1) = bucket(j, w, frames);
                let mut sum = 0.0;
                for frame in &spec.frames[t0..t1] {
                    sum += frame[f0..f1].iter().sum::<f64>();
                }
                // band = ch * h + i and the cell index is (ch * h + i) * w + j
                data[band * w + j] = sum / ((f1 - f0) * (t1 - t0)) as f64;
            }
        }
        FeatureMap::from_vec(c, h, w, data)
    }
}

impl PairExtractor for SpectrogramStatExtractor<'_> {
    fn extract(&self, window: &TimeInterval, rng: &mut Rng) -> Result<AVPairFeatures> {
        let audio = self.pool(window)?;
        let inside: Vec<&FaceObservation> = self
            .faces
            .iter()
            .filter(|f| f.time >= window.onset() && f.time < window.offset())
            .collect();
        let face = if inside.is_empty() {
            None
        } else {
            Some(inside[rng.random_range(0..inside.len())].map.clone())
        };
        Ok(AVPairFeatures {
            audio,
            visible: face.is_some(),
            face,
            segment: *window,
            video_id: self.video_id.to_string(),
            true_speaker: None,
        })
    }
}
