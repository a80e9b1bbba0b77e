//! Diarization error rate with overlap scored and a no-score collar around
//! every reference boundary.

mod assign;
mod oracle;
mod report;

use std::collections::BTreeMap;

pub use oracle::brute_force_der;
pub use report::{aggregate, format_report, report_csv, FileScore};

use crate::{Diarization, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DerBreakdown {
    pub missed_s: f64,
    pub fa_s: f64,
    pub spke_s: f64,
    pub scored_speech_s: f64,
    pub ms_pct: f64,
    pub fa_pct: f64,
    pub spke_pct: f64,
    pub der_pct: f64,
}

impl DerBreakdown {
    pub fn from_durations(missed_s: f64, fa_s: f64, spke_s: f64, scored_speech_s: f64) -> Self {
        let pct = |x: f64| {
            if scored_speech_s > 0.0 {
                100.0 * x / scored_speech_s
            } else {
                0.0
            }
        };
        let (ms_pct, fa_pct, spke_pct) = (pct(missed_s), pct(fa_s), pct(spke_s));
        Self {
            missed_s,
            fa_s,
            spke_s,
            scored_speech_s,
            ms_pct,
            fa_pct,
            spke_pct,
            der_pct: ms_pct + fa_pct + spke_pct,
        }
    }
}

/// One elementary time region: length plus the reference and hypothesis
/// speaker indices active in it.
struct Region {
    len: f64,
    refs: Vec<usize>,
    hyps: Vec<usize>,
}

fn active_at(d: &Diarization, speakers: &[String], t: f64) -> Vec<usize> {
    let mut out: Vec<usize> = d
        .segments
        .iter()
        .filter(|s| s.interval.onset() < t && t < s.interval.offset())
        .map(|s| speakers.binary_search(&s.speaker).expect("known speaker"))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Scored regions: the timeline cut at every boundary, minus the collars.
fn scored_regions(reference: &Diarization, hyp: &Diarization, collar: f64) -> Vec<Region> {
    let ref_spk = reference.speakers();
    let hyp_spk = hyp.speakers();
    let ref_bounds: Vec<f64> = reference
        .segments
        .iter()
        .flat_map(|s| [s.interval.onset(), s.interval.offset()])
        .collect();
    let mut cuts: Vec<f64> = ref_bounds.clone();
    cuts.extend(hyp.segments.iter().flat_map(|s| [s.interval.onset(), s.interval.offset()]));
    if collar > 0.0 {
        cuts.extend(ref_bounds.iter().flat_map(|b| [(b - collar).max(0.0), b + collar]));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut regions = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        if collar > 0.0 && ref_bounds.iter().any(|&r| (mid - r).abs() < collar) {
            continue;
        }
        let refs = active_at(reference, &ref_spk, mid);
        let hyps = active_at(hyp, &hyp_spk, mid);
        if refs.is_empty() && hyps.is_empty() {
            continue;
        }
        regions.push(Region { len, refs, hyps });
    }
    regions
}

/// Optimal one-to-one mapping from hypothesis to reference speakers,
/// maximizing co-active time over `regions`.
fn optimal_mapping(regions: &[Region], n_ref: usize, n_hyp: usize) -> Vec<Option<usize>> {
    let mut overlap = vec![vec![0.0; n_ref]; n_hyp];
    for r in regions {
        for &h in &r.hyps {
            for &s in &r.refs {
                overlap[h][s] += r.len;
            }
        }
    }
    assign::max_weight_matching(&overlap, n_ref)
}

/// Hypothesis label to reference label over the whole timeline (no collar).
/// Speakers are processed in sorted label order, which fixes ties.
pub fn map_speakers(reference: &Diarization, hyp: &Diarization) -> BTreeMap<String, String> {
    let ref_spk = reference.speakers();
    let hyp_spk = hyp.speakers();
    let regions = scored_regions(reference, hyp, 0.0);
    optimal_mapping(&regions, ref_spk.len(), hyp_spk.len())
        .into_iter()
        .enumerate()
        .filter_map(|(h, r)| r.map(|r| (hyp_spk[h].clone(), ref_spk[r].clone())))
        .collect()
}

pub fn compute_der(
    reference: &Diarization,
    hyp: &Diarization,
    collar_s: f64,
    score_overlap: bool,
) -> Result<DerBreakdown> {
    if !(collar_s >= 0.0 && collar_s.is_finite()) {
        return Err(Error::InvalidArgument(format!("collar {collar_s} must be non-negative")));
    }
    if reference.file_id != hyp.file_id && !hyp.segments.is_empty() && !reference.segments.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "reference {} and hypothesis {} describe different files",
            reference.file_id, hyp.file_id
        )));
    }
    let mut regions = scored_regions(reference, hyp, collar_s);
    if !score_overlap {
        regions.retain(|r| r.refs.len() <= 1);
    }
    let map = optimal_mapping(&regions, reference.speakers().len(), hyp.speakers().len());

    let (mut missed, mut fa, mut spke, mut scored) = (0.0, 0.0, 0.0, 0.0);
    for r in &regions {
        let (nr, nh) = (r.refs.len(), r.hyps.len());
        let matched = r
            .hyps
            .iter()
            .filter(|&&h| map[h].is_some_and(|s| r.refs.contains(&s)))
            .count();
        missed += nr.saturating_sub(nh) as f64 * r.len;
        fa += nh.saturating_sub(nr) as f64 * r.len;
        spke += (nr.min(nh) - matched) as f64 * r.len;
        scored += nr as f64 * r.len;
    }
    if scored <= 0.0 {
        return Err(Error::NothingToScore);
    }
    Ok(DerBreakdown::from_durations(missed, fa, spke, scored))
}
