use rand::Rng as _;

use super::AVPairFeatures;
use crate::rng::Rng;

/// Hides a visible face with probability `p`. One uniform draw is consumed
/// per call whether or not the face is visible, so streams stay aligned.
pub fn apply_missing_augmentation(pair: &AVPairFeatures, p: f64, rng: &mut Rng) -> AVPairFeatures {
    let u: f64 = rng.random();
    let mut out = pair.clone();
    if pair.visible && u < p {
        out.hide_face();
    }
    out
}
