//! Audio-visual speaker diarization.
//!
//! The pipeline runs in stages:
//!
//! ```text
//! speech regions (energy or oracle VAD)
//!   -> 2 s sliding windows, 0.5 s stride
//!   -> audio / face feature maps per window
//!   -> pairwise relation scores (visibility-case masks)
//!   -> symmetric similarity matrix -> AHC
//!   -> hypothesis RTTM -> DER (0.25 s collar, overlap scored)
//! ```
//!
//! Everything is deterministic given a seed.

pub mod audio;
pub mod cluster;
pub mod config;
pub mod diarization;
mod error;
pub mod features;
pub mod interval;
pub mod pipeline;
pub mod relation;
pub mod rng;
pub mod rttm;
pub mod scoring;

pub use cluster::{ahc_cluster, build_similarity_matrix, segments_to_hypothesis, Linkage, PairScorer, SimilarityMatrix};
pub use config::Config;
pub use diarization::{normalize_diarization, Diarization, Segment};
pub use error::{Error, Result};
pub use features::{AVPairFeatures, FeatureMap};
pub use interval::{TimeInterval, TIME_EPS};
pub use relation::{RelationModel, TrainedScorer};
pub use rttm::{parse_rttm, serialize_rttm, RttmRecord};
pub use scoring::{compute_der, DerBreakdown};

