//! Tick-based DER reference: evaluates every `resolution_s` tick on its own
//! and finds the speaker mapping by exhaustive enumeration.

use std::collections::HashMap;

use super::DerBreakdown;
use crate::{Diarization, Error, Result};

const MAX_SPEAKERS: usize = 8;
const MAX_DURATION_S: f64 = 600.0;

fn speaker_masks(d: &Diarization, speakers: &[String], t: f64) -> u32 {
    d.segments
        .iter()
        .filter(|s| s.interval.onset() <= t && t < s.interval.offset())
        .fold(0, |m, s| m | 1 << speakers.iter().position(|x| *x == s.speaker).unwrap())
}

/// Best total co-activity over partial injective maps ref -> hyp.
fn best_mapping(hist: &[((u32, u32), u64)], n_ref: usize, n_hyp: usize) -> Vec<Option<usize>> {
    fn score(hist: &[((u32, u32), u64)], map: &[Option<usize>]) -> u64 {
        hist.iter()
            .map(|&((r, h), c)| {
                let hits = map
                    .iter()
                    .enumerate()
                    .filter(|(ri, hi)| r >> ri & 1 == 1 && hi.is_some_and(|hi| h >> hi & 1 == 1))
                    .count() as u64;
                hits * c
            })
            .sum()
    }
    fn go(
        hist: &[((u32, u32), u64)],
        ri: usize,
        n_hyp: usize,
        used: u32,
        map: &mut Vec<Option<usize>>,
        best: &mut (u64, Vec<Option<usize>>),
    ) {
        if ri == map.len() {
            let s = score(hist, map);
            if s > best.0 {
                *best = (s, map.clone());
            }
            return;
        }
        map[ri] = None;
        go(hist, ri + 1, n_hyp, used, map, best);
        for h in 0..n_hyp {
            if used >> h & 1 == 0 {
                map[ri] = Some(h);
                go(hist, ri + 1, n_hyp, used | 1 << h, map, best);
            }
        }
        map[ri] = None;
    }
    let mut map = vec![None; n_ref];
    let mut best = (0, vec![None; n_ref]);
    go(hist, 0, n_hyp, 0, &mut map, &mut best);
    best.1
}

pub fn brute_force_der(
    reference: &Diarization,
    hyp: &Diarization,
    collar_s: f64,
    resolution_s: f64,
) -> Result<DerBreakdown> {
    if !(resolution_s > 0.0) || !(collar_s >= 0.0) {
        return Err(Error::InvalidArgument("resolution must be positive, collar non-negative".into()));
    }
    let ref_spk = reference.speakers();
    let hyp_spk = hyp.speakers();
    let n = ref_spk.len().max(hyp_spk.len());
    if n > MAX_SPEAKERS {
        return Err(Error::TooManySpeakers(n));
    }
    let end = reference
        .segments
        .iter()
        .chain(&hyp.segments)
        .map(|s| s.interval.offset())
        .fold(0.0, f64::max);
    if end > MAX_DURATION_S {
        return Err(Error::InvalidArgument(format!("{end:.1} s exceeds the oracle's {MAX_DURATION_S} s limit")));
    }
    let bounds: Vec<f64> = reference
        .segments
        .iter()
        .flat_map(|s| [s.interval.onset(), s.interval.offset()])
        .collect();

    let ticks = (end / resolution_s).ceil() as u64;
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    for k in 0..ticks {
        let t = (k as f64 + 0.5) * resolution_s;
        if bounds.iter().any(|&b| (t - b).abs() < collar_s) {
            continue;
        }
        let r = speaker_masks(reference, &ref_spk, t);
        let h = speaker_masks(hyp, &hyp_spk, t);
        if r | h != 0 {
            *counts.entry((r, h)).or_default() += 1;
        }
    }
    let mut hist: Vec<((u32, u32), u64)> = counts.into_iter().collect();
    hist.sort_unstable();
    let map = best_mapping(&hist, ref_spk.len(), hyp_spk.len());

    let (mut missed, mut fa, mut spke, mut scored) = (0u64, 0u64, 0u64, 0u64);
    for &((r, h), c) in &hist {
        let (nr, nh) = (r.count_ones() as u64, h.count_ones() as u64);
        let matched = map
            .iter()
            .enumerate()
            .filter(|(ri, hi)| r >> ri & 1 == 1 && hi.is_some_and(|hi| h >> hi & 1 == 1))
            .count() as u64;
        missed += nr.saturating_sub(nh) * c;
        fa += nh.saturating_sub(nr) * c;
        spke += (nr.min(nh) - matched) * c;
        scored += nr * c;
    }
    if scored == 0 {
        return Err(Error::NothingToScore);
    }
    let secs = |x: u64| x as f64 * resolution_s;
    Ok(DerBreakdown::from_durations(secs(missed), secs(fa), secs(spke), secs(scored)))
}
