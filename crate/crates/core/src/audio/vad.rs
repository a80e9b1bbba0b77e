//! Frame-energy voice activity detection.
//!
//! A frame is active when its energy exceeds
//! `max(min(p + offset, e_max - offset), floor)`, where `p` is the configured
//! percentile of all frame energies. The `e_max - offset` cap keeps a signal
//! that is speech from start to end from thresholding itself out; the
//! absolute floor keeps digital silence inactive.

use super::spectrogram::frame_count;
use super::AudioSignal;
use crate::{Config, TimeInterval, TIME_EPS};

/// Per-frame energy in dB (`10 log10(mean(x^2) + 1e-10)`), unwindowed.
pub fn frame_energies_db(signal: &AudioSignal, cfg: &Config) -> Vec<f64> {
    let win = cfg.win_samples();
    let hop = cfg.hop_samples().max(1);
    let n = frame_count(signal.samples.len(), win, hop);
    (0..n)
        .map(|t| {
            let frame = &signal.samples[t * hop..t * hop + win];
            let power = frame.iter().map(|x| x * x).sum::<f64>() / win as f64;
            10.0 * (power + 1e-10).log10()
        })
        .collect()
}

fn percentile(values: &[f64], pct: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = pct / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
}

fn median_filter(active: &[bool], width: usize) -> Vec<bool> {
    let half = (width / 2) as isize;
    let last = active.len() as isize - 1;
    (0..active.len() as isize)
        .map(|i| {
            // edges replicate the boundary frame
            let count = (-half..=half)
                .filter(|&k| active[(i + k).clamp(0, last) as usize])
                .count();
            count as isize > half
        })
        .collect()
}

pub fn energy_vad(signal: &AudioSignal, cfg: &Config) -> Vec<TimeInterval> {
    let energies = frame_energies_db(signal, cfg);
    if energies.is_empty() {
        return Vec::new();
    }
    let emax = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rel = percentile(&energies, cfg.vad_percentile) + cfg.vad_offset_db;
    let threshold = rel.min(emax - cfg.vad_offset_db).max(cfg.vad_floor_db);
    let raw: Vec<bool> = energies.iter().map(|&e| e > threshold).collect();
    let active = median_filter(&raw, cfg.vad_median.max(1));

    let hop_s = cfg.spec_hop_ms / 1000.0;
    let win_s = cfg.spec_win_ms / 1000.0;
    let duration = signal.duration();
    let centre = (win_s - hop_s) / 2.0;
    let last = active.len() - 1;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (i, &a) in active.iter().enumerate() {
        match (a, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
        if i == last {
            if let Some(s) = start.take() {
                runs.push((s, i));
            }
        }
    }
    // each frame owns one hop of time around its centre; the outermost frames
    // extend to the signal edges
    let mut spans: Vec<(f64, f64)> = runs
        .into_iter()
        .map(|(a, b)| {
            let on = if a == 0 { 0.0 } else { a as f64 * hop_s + centre };
            let off = if b == last {
                duration
            } else {
                (b + 1) as f64 * hop_s + centre
            };
            (on, off.min(duration))
        })
        .filter(|(on, off)| off - on >= cfg.vad_min_dur_s - TIME_EPS)
        .collect();

    if cfg.vad_bridge_s > 0.0 {
        let mut bridged: Vec<(f64, f64)> = Vec::new();
        for s in spans.drain(..) {
            match bridged.last_mut() {
                Some(prev) if s.0 - prev.1 < cfg.vad_bridge_s => prev.1 = s.1,
                _ => bridged.push(s),
            }
        }
        spans = bridged;
    }
    spans
        .into_iter()
        .filter_map(|(a, b)| TimeInterval::new(a, b).ok())
        .collect()
}
