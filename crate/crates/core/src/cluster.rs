//! Similarity graph construction and agglomerative clustering.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::diarization::{Diarization, Segment};
use crate::features::AVPairFeatures;
use crate::relation::RelationModel;
use crate::{Error, Result, TimeInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linkage {
    /// Mean of all cross-cluster similarities.
    #[default]
    Average,
    /// Largest cross-cluster similarity.
    Single,
    /// Smallest cross-cluster similarity.
    Complete,
}

impl Linkage {
    pub const ALL: [Linkage; 3] = [Linkage::Average, Linkage::Single, Linkage::Complete];
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Average => "average",
            Linkage::Single => "single",
            Linkage::Complete => "complete",
        })
    }
}

impl FromStr for Linkage {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "average" => Ok(Linkage::Average),
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            _ => Err(format!("unknown linkage {s:?}")),
        }
    }
}

/// Symmetric `n x n` similarities in [0, 1] with a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimMismatch(format!("{} values for {n}x{n}", values.len())));
        }
        for i in 0..n {
            if values[i * n + i] != 1.0 {
                return Err(Error::InvalidArgument(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!("S[{i}][{j}] = {v} outside [0, 1]")));
                }
                if v != values[j * n + i] {
                    return Err(Error::InvalidArgument(format!("S[{i}][{j}] != S[{j}][{i}]")));
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimMismatch("rows must be square".into()));
        }
        Self::new(n, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Row-major CSV, six decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{:.6}", self.get(i, j))).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// Anything that scores an ordered pair of candidates in [0, 1].
///
/// Scores must not depend on `segment`: windows whose features are otherwise
/// equal are scored once.
pub trait PairScorer: Sync {
    fn score(&self, left: &AVPairFeatures, right: &AVPairFeatures) -> Result<f64>;
}

impl PairScorer for RelationModel {
    fn score(&self, left: &AVPairFeatures, right: &AVPairFeatures) -> Result<f64> {
        self.score_pair(left, right)
    }
}

/// Everything a scorer may look at, with floats as bit patterns.
fn content_key(p: &AVPairFeatures) -> (Vec<u64>, bool, &str, Option<&str>) {
    let mut bits: Vec<u64> = p.audio.data.iter().map(|v| v.to_bits()).collect();
    let (ac, ah, aw) = p.audio.shape();
    bits.extend([ac as u64, ah as u64, aw as u64]);
    if let Some(f) = &p.face {
        let (fc, fh, fw) = f.shape();
        bits.extend([fc as u64, fh as u64, fw as u64]);
        bits.extend(f.data.iter().map(|v| v.to_bits()));
    }
    (bits, p.visible, &p.video_id, p.true_speaker.as_deref())
}

/// `S[i][j]` is the mean of the two orderings' scores; the diagonal is 1.
pub fn build_similarity_matrix(pairs: &[AVPairFeatures], scorer: &dyn PairScorer) -> Result<SimilarityMatrix> {
    let n = pairs.len();
    let mut index = HashMap::new();
    let mut unique: Vec<usize> = Vec::new();
    let slot: Vec<usize> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            *index.entry(content_key(p)).or_insert_with(|| {
                unique.push(i);
                unique.len() - 1
            })
        })
        .collect();
    let u = unique.len();
    // ordered scores between distinct feature sets, diagonal included since
    // two windows may share features
    let rows: Vec<Result<Vec<f64>>> = (0..u)
        .into_par_iter()
        .map(|a| {
            (0..u)
                .map(|b| scorer.score(&pairs[unique[a]], &pairs[unique[b]]))
                .collect()
        })
        .collect();
    let ordered = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let (a, b) = (slot[i], slot[j]);
            let v = (ordered[a][b] + ordered[b][a]) / 2.0;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    SimilarityMatrix::new(n, values)
}

/// Threshold-stopped agglomerative clustering.
///
/// Clusters are keyed by their smallest member. Each step merges the pair
/// with the highest linkage similarity, preferring the smallest key pair on
/// ties, until that similarity drops below `threshold`. Labels are numbered
/// in order of first appearance.
pub fn ahc_cluster(s: &SimilarityMatrix, threshold: f64, linkage: Linkage) -> Vec<usize> {
    let n = s.len();
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut parent: Vec<usize> = (0..n).collect();
    // average linkage keeps cross-cluster sums, the others the extreme value
    let mut link: Vec<f64> = (0..n * n).map(|k| s.get(k / n, k % n)).collect();

    let value = |link: &[f64], size: &[usize], a: usize, b: usize| match linkage {
        Linkage::Average => link[a * n + b] / (size[a] * size[b]) as f64,
        Linkage::Single | Linkage::Complete => link[a * n + b],
    };

    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..n {
            if !active[a] {
                continue;
            }
            for b in (a + 1)..n {
                if !active[b] {
                    continue;
                }
                let v = value(&link, &size, a, b);
                if best.is_none_or(|(_, _, bv)| v > bv) {
                    best = Some((a, b, v));
                }
            }
        }
        let Some((a, b, v)) = best else { break };
        if v < threshold {
            break;
        }
        for c in 0..n {
            if !active[c] || c == a || c == b {
                continue;
            }
            let merged = match linkage {
                Linkage::Average => link[a * n + c] + link[b * n + c],
                Linkage::Single => link[a * n + c].max(link[b * n + c]),
                Linkage::Complete => link[a * n + c].min(link[b * n + c]),
            };
            link[a * n + c] = merged;
            link[c * n + a] = merged;
        }
        size[a] += size[b];
        active[b] = false;
        parent[b] = a;
    }

    let root = |mut i: usize| {
        while parent[i] != i {
            i = parent[i];
        }
        i
    };
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = root(i);
            if ids[r] == usize::MAX {
                ids[r] = next;
                next += 1;
            }
            ids[r]
        })
        .collect()
}

/// Labels windows `spk<label>` and merges same-label windows that overlap or touch.
pub fn segments_to_hypothesis(
    segments: &[TimeInterval],
    labels: &[usize],
    file_id: &str,
) -> Result<Diarization> {
    if segments.len() != labels.len() {
        return Err(Error::LengthMismatch(segments.len(), labels.len()));
    }
    let segs = segments
        .iter()
        .zip(labels)
        .map(|(iv, l)| Segment {
            interval: *iv,
            speaker: format!("spk{l}"),
        })
        .collect();
    Ok(Diarization::from_segments(file_id, segs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> SimilarityMatrix {
        SimilarityMatrix::from_rows(&[
            vec![1.0, 0.9, 0.1],
            vec![0.9, 1.0, 0.2],
            vec![0.1, 0.2, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn hand_traced_example() {
        let s = example();
        assert_eq!(ahc_cluster(&s, 0.5, Linkage::Average), vec![0, 0, 1]);
        assert_eq!(ahc_cluster(&s, 0.95, Linkage::Average), vec![0, 1, 2]);
        assert_eq!(ahc_cluster(&s, 0.0, Linkage::Average), vec![0, 0, 0]);
        // (0,1) at .9, then single link max(.1,.2) = .2, complete min = .1
        assert_eq!(ahc_cluster(&s, 0.15, Linkage::Single), vec![0, 0, 0]);
        assert_eq!(ahc_cluster(&s, 0.15, Linkage::Complete), vec![0, 0, 1]);
    }

    #[test]
    fn ties_prefer_smallest_pair() {
        let s = SimilarityMatrix::from_rows(&[
            vec![1.0, 0.5, 0.5, 0.0],
            vec![0.5, 1.0, 0.0, 0.5],
            vec![0.5, 0.0, 1.0, 0.5],
            vec![0.0, 0.5, 0.5, 1.0],
        ])
        .unwrap();
        // (0,1) wins the four-way tie, leaving (2,3); starting from (0,2)
        // would have produced [0, 1, 0, 1]
        assert_eq!(ahc_cluster(&s, 0.5, Linkage::Average), vec![0, 0, 1, 1]);
        assert_eq!(ahc_cluster(&s, 0.5, Linkage::Complete), vec![0, 0, 1, 1]);
    }

    #[test]
    fn empty_and_single() {
        let s = SimilarityMatrix::new(0, vec![]).unwrap();
        assert!(ahc_cluster(&s, 0.5, Linkage::Average).is_empty());
        let s = SimilarityMatrix::new(1, vec![1.0]).unwrap();
        assert_eq!(ahc_cluster(&s, 0.5, Linkage::Average), vec![0]);
    }

    struct Constant(f64);
    impl PairScorer for Constant {
        fn score(&self, _: &AVPairFeatures, _: &AVPairFeatures) -> Result<f64> {
            Ok(self.0)
        }
    }

    /// Asymmetric: depends on the first audio value of each side.
    struct Lopsided;
    impl PairScorer for Lopsided {
        fn score(&self, a: &AVPairFeatures, b: &AVPairFeatures) -> Result<f64> {
            Ok((0.7 * a.audio.data[0] + 0.2 * b.audio.data[0]).clamp(0.0, 1.0))
        }
    }

    fn pair(v: f64, onset: f64) -> AVPairFeatures {
        AVPairFeatures {
            audio: crate::FeatureMap::from_vec(1, 1, 1, vec![v]).unwrap(),
            face: None,
            visible: false,
            segment: TimeInterval::new(onset, onset + 1.0).unwrap(),
            video_id: "v".into(),
            true_speaker: None,
        }
    }

    #[test]
    fn similarity_matrix_examples() {
        let s = build_similarity_matrix(&[pair(0.1, 0.0)], &Constant(0.5)).unwrap();
        assert_eq!(s.get(0, 0), 1.0);
        let pairs: Vec<_> = (0..4).map(|k| pair(k as f64 / 4.0, k as f64)).collect();
        let s = build_similarity_matrix(&pairs, &Constant(0.5)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(s.get(i, j), if i == j { 1.0 } else { 0.5 });
            }
        }
    }

    #[test]
    fn duplicate_windows_match_direct_scoring() {
        // windows 0, 2, 3 share features; 1 and 4 share features
        let vals = [0.2, 0.9, 0.2, 0.2, 0.9, 0.5];
        let pairs: Vec<_> = vals.iter().enumerate().map(|(k, &v)| pair(v, k as f64)).collect();
        let s = build_similarity_matrix(&pairs, &Lopsided).unwrap();
        for i in 0..pairs.len() {
            for j in 0..pairs.len() {
                let want = if i == j {
                    1.0
                } else {
                    (Lopsided.score(&pairs[i], &pairs[j]).unwrap() + Lopsided.score(&pairs[j], &pairs[i]).unwrap()) / 2.0
                };
                assert_eq!(s.get(i, j), want, "({i}, {j})");
                assert_eq!(s.get(i, j), s.get(j, i));
            }
        }
    }

    #[test]
    fn matrix_validation() {
        assert!(SimilarityMatrix::from_rows(&[vec![1.0, 0.3], vec![0.4, 1.0]]).is_err());
        assert!(SimilarityMatrix::from_rows(&[vec![0.9, 0.3], vec![0.3, 1.0]]).is_err());
        assert!(SimilarityMatrix::from_rows(&[vec![1.0, 1.3], vec![1.3, 1.0]]).is_err());
        assert_eq!(example().to_csv().lines().next().unwrap(), "1.000000,0.900000,0.100000");
    }

    #[test]
    fn hypothesis_merging() {
        let iv = |a, b| TimeInterval::new(a, b).unwrap();
        let d = segments_to_hypothesis(&[iv(0.0, 2.0), iv(0.5, 2.5)], &[0, 0], "f").unwrap();
        assert_eq!(d.segments.len(), 1);
        assert_eq!(d.segments[0].speaker, "spk0");
        assert_eq!(d.segments[0].interval, iv(0.0, 2.5));

        let d = segments_to_hypothesis(&[iv(0.0, 1.0), iv(3.0, 4.0)], &[0, 1], "f").unwrap();
        assert_eq!(d.segments.len(), 2);

        let d = segments_to_hypothesis(&[iv(0.0, 2.0), iv(0.5, 2.5)], &[0, 1], "f").unwrap();
        assert_eq!(d.segments.len(), 2);
        assert!(d.segments[0].interval.overlap(&d.segments[1].interval) > 1.0);

        assert!(segments_to_hypothesis(&[iv(0.0, 1.0)], &[0, 1], "f").is_err());
    }

    fn arb_matrix() -> impl Strategy<Value = SimilarityMatrix> {
        (1usize..9).prop_flat_map(|n| {
            proptest::collection::vec(0.0f64..1.0, n * n).prop_map(move |raw| {
                let mut v = vec![0.0; n * n];
                for i in 0..n {
                    v[i * n + i] = 1.0;
                    for j in (i + 1)..n {
                        v[i * n + j] = raw[i * n + j];
                        v[j * n + i] = raw[i * n + j];
                    }
                }
                SimilarityMatrix::new(n, v).unwrap()
            })
        })
    }

    fn partition(labels: &[usize]) -> Vec<Vec<usize>> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups.sort();
        groups
    }

    proptest! {
        #[test]
        fn threshold_monotone(s in arb_matrix(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            for link in Linkage::ALL {
                let k_lo = ahc_cluster(&s, lo, link).into_iter().max().map_or(0, |m| m + 1);
                let k_hi = ahc_cluster(&s, hi, link).into_iter().max().map_or(0, |m| m + 1);
                prop_assert!(k_hi >= k_lo);
            }
        }

        #[test]
        fn labels_are_first_occurrence(s in arb_matrix(), t in 0.0f64..1.0) {
            let labels = ahc_cluster(&s, t, Linkage::Average);
            let mut next = 0;
            for &l in &labels {
                prop_assert!(l <= next);
                if l == next { next += 1; }
            }
        }

        #[test]
        fn permutation_equivariant(s in arb_matrix(), t in 0.0f64..1.0, seed in 0u64..1000) {
            // reversing the order keeps the partition (ties aside, which random values avoid)
            let n = s.len();
            let perm: Vec<usize> = if seed % 2 == 0 { (0..n).rev().collect() } else { (0..n).map(|i| (i + 1) % n).collect() };
            let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| s.get(perm[i], perm[j])).collect()).collect();
            let ps = SimilarityMatrix::from_rows(&rows).unwrap();
            for link in Linkage::ALL {
                let a = ahc_cluster(&s, t, link);
                let b = ahc_cluster(&ps, t, link);
                let mapped: Vec<usize> = (0..n).map(|i| {
                    // item perm[i] of s sits at i in ps
                    let pos = perm.iter().position(|&p| p == i).unwrap();
                    b[pos]
                }).collect();
                prop_assert_eq!(partition(&a), partition(&mapped));
            }
        }
    }
}
