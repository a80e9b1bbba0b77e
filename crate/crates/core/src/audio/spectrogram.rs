use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::AudioSignal;
use crate::{Config, Error, Result};

/// Added to the power before taking the log, so silence stays finite.
pub const LOG_FLOOR: f64 = 1e-10;

const MIN_FFT: usize = 512;

/// Log-power spectrogram, `frames[t][k]` for frame `t` and frequency bin `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: Vec<Vec<f64>>,
    pub hop_ms: f64,
    pub win_ms: f64,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn num_bins(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }
}

pub(crate) fn frame_count(len: usize, win: usize, hop: usize) -> usize {
    if len < win {
        0
    } else {
        (len - win) / hop + 1
    }
}

fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Hamming-windowed, zero-padded FFT per frame; `fft_len / 2 + 1` log-power bins.
pub fn compute_spectrogram(signal: &AudioSignal, cfg: &Config) -> Result<Spectrogram> {
    let win = cfg.win_samples();
    let hop = cfg.hop_samples().max(1);
    if signal.samples.len() < win || win == 0 {
        return Err(Error::SignalTooShort {
            len: signal.samples.len(),
            need: win,
        });
    }
    let nfft = win.next_power_of_two().max(MIN_FFT);
    let nbins = nfft / 2 + 1;
    let window = hamming(win);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let n = frame_count(signal.samples.len(), win, hop);

    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut frames = Vec::with_capacity(n);
    for t in 0..n {
        let start = t * hop;
        for (i, c) in buf.iter_mut().enumerate() {
            *c = if i < win {
                Complex::new(signal.samples[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        frames.push(
            buf[..nbins]
                .iter()
                .map(|c| (c.norm_sqr() + LOG_FLOOR).ln())
                .collect(),
        );
    }
    Ok(Spectrogram {
        frames,
        hop_ms: cfg.spec_hop_ms,
        win_ms: cfg.spec_win_ms,
    })
}
