//! Feature maps, audio-visual pairs, the synthetic corpus, and extractors.

mod augment;
mod corpus;
mod extract;
pub mod io;
mod map;

pub use augment::apply_missing_augmentation;
pub use corpus::{make_synthetic_corpus, Corpus, CorpusSpec, SpeakerInfo, Video};
pub use extract::{
    extract_pair_features, FaceObservation, PairExtractor, SpectrogramStatExtractor,
    SyntheticExtractor,
};
pub use map::{adaptive_pool, FeatureMap};

use crate::TimeInterval;

/// One candidate speaker: the audio of a segment plus at most one face.
#[derive(Debug, Clone, PartialEq)]
pub struct AVPairFeatures {
    pub audio: FeatureMap,
    /// `None` or all zeros when the face is not visible.
    pub face: Option<FeatureMap>,
    pub visible: bool,
    pub segment: TimeInterval,
    pub video_id: String,
    /// Ground-truth speaker label, when known.
    pub true_speaker: Option<String>,
}

impl AVPairFeatures {
    /// Blanks the face: zero map of the same shape, `visible = false`.
    pub fn hide_face(&mut self) {
        if let Some(face) = self.face.as_mut() {
            face.data.iter_mut().for_each(|v| *v = 0.0);
        }
        self.visible = false;
    }
}
