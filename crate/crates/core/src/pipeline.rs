//! End-to-end diarization: windows, features, similarity, clustering, scoring.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::audio::slide_segments;
use crate::cluster::{ahc_cluster, build_similarity_matrix, segments_to_hypothesis, PairScorer, SimilarityMatrix};
use crate::features::{apply_missing_augmentation, Corpus, PairExtractor, SyntheticExtractor, Video};
use crate::rng;
use crate::scoring::{aggregate, compute_der, DerBreakdown, FileScore};
use crate::{AVPairFeatures, Config, Diarization, Error, Linkage, Result, TimeInterval};

/// Sliding windows over the given speech regions, in time order.
pub fn vad_windows(regions: &[TimeInterval], cfg: &Config) -> Vec<TimeInterval> {
    regions.iter().flat_map(|r| slide_segments(r, cfg)).collect()
}

/// Windows over the reference's speech regions (oracle VAD).
pub fn oracle_windows(reference: &Diarization, cfg: &Config) -> Vec<TimeInterval> {
    vad_windows(&reference.speech_regions(), cfg)
}

/// Extracts every window and then drops visible faces at `missing_rate`.
/// The random stream is derived from `seed` and `stream_tag`.
pub fn window_features(
    windows: &[TimeInterval],
    extractor: &dyn PairExtractor,
    missing_rate: f64,
    seed: u64,
    stream_tag: &str,
) -> Result<Vec<AVPairFeatures>> {
    if !(0.0..=1.0).contains(&missing_rate) {
        return Err(Error::InvalidArgument(format!("missing rate {missing_rate} outside [0, 1]")));
    }
    let mut r = rng::stream(seed, rng::stream_id(stream_tag));
    windows
        .iter()
        .map(|w| {
            let p = extractor.extract(w, &mut r)?;
            Ok(apply_missing_augmentation(&p, missing_rate, &mut r))
        })
        .collect()
}

/// Oracle-VAD window features of one corpus video.
pub fn video_features(video: &Video, cfg: &Config, missing_rate: f64, seed: u64) -> Result<Vec<AVPairFeatures>> {
    let windows = oracle_windows(&video.reference, cfg);
    window_features(&windows, &SyntheticExtractor { video }, missing_rate, seed, &video.video_id)
}

/// Clusters the windows of one file and returns the hypothesis.
pub fn cluster_windows(
    pairs: &[AVPairFeatures],
    s: &SimilarityMatrix,
    threshold: f64,
    linkage: Linkage,
    file_id: &str,
) -> Result<Diarization> {
    let labels = ahc_cluster(s, threshold, linkage);
    let windows: Vec<TimeInterval> = pairs.iter().map(|p| p.segment).collect();
    segments_to_hypothesis(&windows, &labels, file_id)
}

/// Hypotheses and per-file scores for a whole corpus.
#[derive(Debug, Clone)]
pub struct CorpusEval {
    pub hypotheses: Vec<Diarization>,
    pub scores: Vec<FileScore>,
    pub total: DerBreakdown,
}

pub fn diarize_video(
    video: &Video,
    scorer: &dyn PairScorer,
    threshold: f64,
    cfg: &Config,
    missing_rate: f64,
    seed: u64,
) -> Result<Diarization> {
    let pairs = video_features(video, cfg, missing_rate, seed)?;
    let s = build_similarity_matrix(&pairs, scorer)?;
    cluster_windows(&pairs, &s, threshold, cfg.linkage, &video.video_id)
}

/// Diarizes every video with oracle VAD and scores it against its reference.
pub fn evaluate_corpus(
    corpus: &Corpus,
    scorer: &dyn PairScorer,
    threshold: f64,
    cfg: &Config,
    missing_rate: f64,
    seed: u64,
) -> Result<CorpusEval> {
    let per_video: Vec<Result<(Diarization, FileScore)>> = corpus
        .videos
        .par_iter()
        .map(|v| {
            let hyp = diarize_video(v, scorer, threshold, cfg, missing_rate, seed)?;
            let der = compute_der(&v.reference, &hyp, cfg.collar_s, true)?;
            Ok((hyp, FileScore { file_id: v.video_id.clone(), der }))
        })
        .collect();
    let mut hypotheses = Vec::new();
    let mut scores = Vec::new();
    for r in per_video {
        let (h, s) = r?;
        hypotheses.push(h);
        scores.push(s);
    }
    let total = aggregate(&scores);
    Ok(CorpusEval { hypotheses, scores, total })
}

/// Corpus DER for every threshold, computing each similarity matrix once.
pub fn threshold_sweep(
    corpus: &Corpus,
    scorer: &dyn PairScorer,
    grid: &[f64],
    cfg: &Config,
    seed: u64,
) -> Result<Vec<DerBreakdown>> {
    let per_video: Vec<Result<Vec<DerBreakdown>>> = corpus
        .videos
        .par_iter()
        .map(|v| {
            let pairs = video_features(v, cfg, 0.0, seed)?;
            let s = build_similarity_matrix(&pairs, scorer)?;
            grid.iter()
                .map(|&t| {
                    let hyp = cluster_windows(&pairs, &s, t, cfg.linkage, &v.video_id)?;
                    compute_der(&v.reference, &hyp, cfg.collar_s, true)
                })
                .collect()
        })
        .collect();
    let per_video = per_video.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((0..grid.len())
        .map(|k| {
            let files: Vec<FileScore> = per_video
                .iter()
                .map(|v| FileScore { file_id: String::new(), der: v[k] })
                .collect();
            aggregate(&files)
        })
        .collect())
}

/// `0.0, 0.1, ..., 1.0`.
pub fn default_missing_rates() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub missing_rate: f64,
    pub der: DerBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Arithmetic means of `(ms, fa, spke, der)` percentages over the rows.
    pub fn average(&self) -> (f64, f64, f64, f64) {
        let n = self.rows.len().max(1) as f64;
        let mean = |f: fn(&DerBreakdown) -> f64| self.rows.iter().map(|r| f(&r.der)).sum::<f64>() / n;
        (
            mean(|d| d.ms_pct),
            mean(|d| d.fa_pct),
            mean(|d| d.spke_pct),
            mean(|d| d.der_pct),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("missing_rate,ms_pct,fa_pct,spke_pct,der_pct\n");
        for r in &self.rows {
            let d = &r.der;
            let _ = writeln!(
                s,
                "{:.1},{:.4},{:.4},{:.4},{:.4}",
                r.missing_rate, d.ms_pct, d.fa_pct, d.spke_pct, d.der_pct
            );
        }
        let (ms, fa, spke, der) = self.average();
        let _ = writeln!(s, "avg,{ms:.4},{fa:.4},{spke:.4},{der:.4}");
        s
    }
}

/// Corpus DER at each evaluation-time missing rate, rows sorted by rate.
pub fn missing_rate_sweep(
    corpus: &Corpus,
    scorer: &dyn PairScorer,
    threshold: f64,
    cfg: &Config,
    rates: &[f64],
    seed: u64,
) -> Result<SweepResult> {
    let mut rates = rates.to_vec();
    rates.sort_by(f64::total_cmp);
    let rows = rates
        .into_iter()
        .map(|rate| {
            let eval = evaluate_corpus(corpus, scorer, threshold, cfg, rate, seed)?;
            Ok(SweepRow { missing_rate: rate, der: eval.total })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { rows })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        // tied values share their average 1-based rank
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. A constant series
/// has no defined correlation and yields 0.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Ok(0.0);
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Late fusion: the face score only enters when both faces are visible.
pub fn fuse_scores(s_avr: f64, s_face: Option<f64>, alpha: f64, both_visible: bool) -> f64 {
    match s_face {
        Some(f) if both_visible => alpha * s_avr + (1.0 - alpha) * f,
        _ => s_avr,
    }
}

/// A face-only similarity, defined when both faces are visible.
pub trait FaceScorer: Sync {
    fn face_score(&self, left: &AVPairFeatures, right: &AVPairFeatures) -> Option<f64>;
}

/// `exp(-|m_l - m_r|^2 / tau)` where `m` is the per-channel spatial mean of a
/// face map. Pooling first keeps the score robust to pixel noise.
#[derive(Debug, Clone, Copy)]
pub struct FaceDistanceScorer {
    pub tau: f64,
}

impl FaceScorer for FaceDistanceScorer {
    fn face_score(&self, left: &AVPairFeatures, right: &AVPairFeatures) -> Option<f64> {
        if !(left.visible && right.visible) {
            return None;
        }
        let (a, b) = (left.face.as_ref()?, right.face.as_ref()?);
        if a.shape() != b.shape() || a.data.is_empty() {
            return None;
        }
        let hw = (a.height * a.width) as f64;
        let d2: f64 = a
            .data
            .chunks(a.height * a.width)
            .zip(b.data.chunks(b.height * b.width))
            .map(|(x, y)| ((x.iter().sum::<f64>() - y.iter().sum::<f64>()) / hw).powi(2))
            .sum();
        Some((-d2 / self.tau).exp())
    }
}

/// Relation score fused with a face score.
pub struct FusedScorer<'a> {
    pub avr: &'a dyn PairScorer,
    pub face: &'a dyn FaceScorer,
    pub alpha: f64,
}

impl PairScorer for FusedScorer<'_> {
    fn score(&self, left: &AVPairFeatures, right: &AVPairFeatures) -> Result<f64> {
        let s = self.avr.score(left, right)?;
        let both = left.visible && right.visible;
        Ok(fuse_scores(s, self.face.face_score(left, right), self.alpha, both))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{make_synthetic_corpus, CorpusSpec, FeatureMap};

    struct Constant(f64);
    impl PairScorer for Constant {
        fn score(&self, _: &AVPairFeatures, _: &AVPairFeatures) -> Result<f64> {
            Ok(self.0)
        }
    }

    /// Scores 1 for the same true speaker and 0 otherwise.
    struct Truth;
    impl PairScorer for Truth {
        fn score(&self, a: &AVPairFeatures, b: &AVPairFeatures) -> Result<f64> {
            Ok((a.true_speaker == b.true_speaker) as u8 as f64)
        }
    }

    fn corpus() -> Corpus {
        make_synthetic_corpus(&CorpusSpec {
            n_videos: 3,
            min_speakers: 3,
            max_speakers: 4,
            ..CorpusSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn fusion_examples() {
        assert!((fuse_scores(0.8, Some(0.4), 0.5, true) - 0.6).abs() < 1e-12);
        assert_eq!(fuse_scores(0.8, None, 0.5, true), 0.8);
        assert_eq!(fuse_scores(0.8, Some(0.4), 0.5, false), 0.8);
        assert_eq!(fuse_scores(0.8, Some(0.4), 1.0, true), 0.8);
        assert_eq!(fuse_scores(0.8, Some(0.4), 0.0, true), 0.4);
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap(), 0.0);
        // ranks x = 1 2 3 4, y = 1 2.5 2.5 4
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert!((r - 4.5 / (5.0f64 * 4.5).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn truth_scorer_gives_zero_der() {
        let c = corpus();
        let cfg = Config::default();
        let eval = evaluate_corpus(&c, &Truth, 0.5, &cfg, 0.0, 1).unwrap();
        assert_eq!(eval.total.der_pct, 0.0, "{:?}", eval.scores);
    }

    #[test]
    fn oracle_hypothesis_inside_reference_speech() {
        let c = corpus();
        let cfg = Config::default();
        let eval = evaluate_corpus(&c, &Constant(0.3), 0.5, &cfg, 0.0, 1).unwrap();
        for (v, h) in c.videos.iter().zip(&eval.hypotheses) {
            let regions = v.reference.speech_regions();
            for s in &h.segments {
                assert!(regions.iter().any(|r| r.onset() <= s.interval.onset() + 1e-9
                    && s.interval.offset() <= r.offset() + 1e-9));
            }
        }
    }

    #[test]
    fn full_missing_rate_hides_every_face() {
        let c = corpus();
        let pairs = video_features(&c.videos[0], &Config::default(), 1.0, 5).unwrap();
        assert!(pairs.iter().all(|p| !p.visible));
        let zero = video_features(&c.videos[0], &Config::default(), 0.0, 5).unwrap();
        assert!(zero.iter().any(|p| p.visible));
    }

    #[test]
    fn threshold_sweep_matches_direct_evaluation() {
        let c = corpus();
        let cfg = Config::default();
        let grid = [0.2, 0.5, 0.8];
        let swept = threshold_sweep(&c, &Truth, &grid, &cfg, 4).unwrap();
        for (t, d) in grid.iter().zip(&swept) {
            let direct = evaluate_corpus(&c, &Truth, *t, &cfg, 0.0, 4).unwrap().total;
            assert_eq!(*d, direct);
        }
    }

    #[test]
    fn sweep_rows_and_average() {
        let c = corpus();
        let r = missing_rate_sweep(&c, &Constant(0.9), 0.5, &Config::default(), &[0.5, 0.0, 1.0], 2).unwrap();
        let rates: Vec<f64> = r.rows.iter().map(|x| x.missing_rate).collect();
        assert_eq!(rates, vec![0.0, 0.5, 1.0]);
        let mean = r.rows.iter().map(|x| x.der.der_pct).sum::<f64>() / 3.0;
        assert!((r.average().3 - mean).abs() < 1e-12);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().last().unwrap().starts_with("avg,"));
        assert_eq!(default_missing_rates().len(), 11);
    }

    #[test]
    fn face_distance_scorer() {
        let mk = |face: Vec<f64>, visible: bool| AVPairFeatures {
            audio: FeatureMap::zeros(1, 1, 1),
            face: Some(FeatureMap::from_vec(2, 1, 1, face).unwrap()),
            visible,
            segment: TimeInterval::new(0.0, 1.0).unwrap(),
            video_id: "v".into(),
            true_speaker: None,
        };
        let f = FaceDistanceScorer { tau: 0.5 };
        let a = mk(vec![1.0, 0.0], true);
        assert_eq!(f.face_score(&a, &a), Some(1.0));
        let b = mk(vec![0.0, 1.0], true);
        assert!((f.face_score(&a, &b).unwrap() - (-4.0f64).exp()).abs() < 1e-12);
        assert_eq!(f.face_score(&a, &mk(vec![1.0, 0.0], false)), None);
    }
}
