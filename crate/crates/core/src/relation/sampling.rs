//! Training pairs: positives from one speaker within one video, negatives
//! from two different videos. Labels are only trusted within a video, so no
//! same-video negative is ever drawn.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::features::{AVPairFeatures, Corpus};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub left: AVPairFeatures,
    pub right: AVPairFeatures,
    /// 1.0 for the same identity, 0.0 otherwise.
    pub label: f64,
}

/// Index over a corpus for repeated batch sampling.
pub struct PairSampler<'a> {
    corpus: &'a Corpus,
    /// `(video, pair indices)` for every speaker with two or more segments.
    groups: Vec<(usize, Vec<usize>)>,
    videos: Vec<usize>,
}

impl<'a> PairSampler<'a> {
    pub fn new(corpus: &'a Corpus) -> Result<Self> {
        let mut groups = Vec::new();
        for (vi, v) in corpus.videos.iter().enumerate() {
            let mut by_spk: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (pi, p) in v.pairs.iter().enumerate() {
                let label = p.true_speaker.as_deref().ok_or_else(|| {
                    Error::Sampling(format!("pair {pi} of {} has no speaker label", v.video_id))
                })?;
                by_spk.entry(label).or_default().push(pi);
            }
            groups.extend(by_spk.into_values().filter(|g| g.len() >= 2).map(|g| (vi, g)));
        }
        let videos: Vec<usize> = (0..corpus.videos.len())
            .filter(|&i| !corpus.videos[i].pairs.is_empty())
            .collect();
        if videos.len() < 2 {
            return Err(Error::Sampling("negatives need at least two non-empty videos".into()));
        }
        if groups.is_empty() {
            return Err(Error::Sampling("positives need a speaker with two segments".into()));
        }
        Ok(Self { corpus, groups, videos })
    }

    /// `batch_size / 2` positives followed by negatives.
    pub fn sample(&self, batch_size: usize, rng: &mut Rng) -> Vec<PairExample> {
        let n_pos = batch_size / 2;
        let mut out = Vec::with_capacity(batch_size);
        for _ in 0..n_pos {
            let (vi, idx) = &self.groups[rng.random_range(0..self.groups.len())];
            let a = rng.random_range(0..idx.len());
            let mut b = rng.random_range(0..idx.len() - 1);
            if b >= a {
                b += 1;
            }
            let pairs = &self.corpus.videos[*vi].pairs;
            out.push(PairExample {
                left: pairs[idx[a]].clone(),
                right: pairs[idx[b]].clone(),
                label: 1.0,
            });
        }
        for _ in n_pos..batch_size {
            let a = rng.random_range(0..self.videos.len());
            let mut b = rng.random_range(0..self.videos.len() - 1);
            if b >= a {
                b += 1;
            }
            let pick = |v: usize, rng: &mut Rng| {
                let pairs = &self.corpus.videos[self.videos[v]].pairs;
                pairs[rng.random_range(0..pairs.len())].clone()
            };
            let left = pick(a, rng);
            let right = pick(b, rng);
            out.push(PairExample { left, right, label: 0.0 });
        }
        out
    }
}

pub fn sample_batch(corpus: &Corpus, batch_size: usize, rng: &mut Rng) -> Result<Vec<PairExample>> {
    Ok(PairSampler::new(corpus)?.sample(batch_size, rng))
}
