//! Run configuration, loaded from flat `key = value` text.
//!
//! Lines starting with `#` (and anything after a `#`) are comments. Keys not
//! present keep their defaults; unknown keys are rejected.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::cluster::Linkage;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub sample_rate: u32,
    pub window_s: f64,
    pub stride_s: f64,
    pub spec_hop_ms: f64,
    pub spec_win_ms: f64,
    /// Probability of blanking a visible face during training.
    pub missing_prob: f64,
    pub lr: f64,
    pub iterations: usize,
    pub batch_size: usize,
    /// Validation DER is evaluated every this many iterations (and at the end).
    pub eval_every: usize,
    pub collar_s: f64,
    pub c_audio: usize,
    pub c_face: usize,
    pub h: usize,
    pub w: usize,
    pub linkage: Linkage,
    pub threshold_grid: Vec<f64>,
    pub seed: u64,
    pub vad_percentile: f64,
    pub vad_offset_db: f64,
    pub vad_floor_db: f64,
    pub vad_median: usize,
    pub vad_min_dur_s: f64,
    pub vad_bridge_s: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            window_s: 2.0,
            stride_s: 0.5,
            spec_hop_ms: 10.0,
            spec_win_ms: 25.0,
            missing_prob: 0.5,
            lr: 5e-4,
            iterations: 2000,
            batch_size: 16,
            eval_every: 500,
            collar_s: 0.25,
            c_audio: 16,
            c_face: 16,
            h: 4,
            w: 4,
            linkage: Linkage::Average,
            threshold_grid: (1..20).map(|k| k as f64 * 0.05).collect(),
            seed: 0,
            vad_percentile: 30.0,
            vad_offset_db: 6.0,
            vad_floor_db: -60.0,
            vad_median: 5,
            vad_min_dur_s: 0.1,
            vad_bridge_s: 0.2,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(key, format!("cannot parse {v:?}")))
}

impl Config {
    pub fn load(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut seen = HashSet::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, "expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::config(key, "duplicate key"));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "sample_rate" => self.sample_rate = parse_num(key, v)?,
            "window_s" => self.window_s = parse_num(key, v)?,
            "stride_s" => self.stride_s = parse_num(key, v)?,
            "spec_hop_ms" => self.spec_hop_ms = parse_num(key, v)?,
            "spec_win_ms" => self.spec_win_ms = parse_num(key, v)?,
            "missing_prob" => self.missing_prob = parse_num(key, v)?,
            "lr" => self.lr = parse_num(key, v)?,
            "iterations" => self.iterations = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "eval_every" => self.eval_every = parse_num(key, v)?,
            "collar_s" => self.collar_s = parse_num(key, v)?,
            "c_audio" => self.c_audio = parse_num(key, v)?,
            "c_face" => self.c_face = parse_num(key, v)?,
            "h" => self.h = parse_num(key, v)?,
            "w" => self.w = parse_num(key, v)?,
            "linkage" => {
                self.linkage = v
                    .parse()
                    .map_err(|_| Error::config(key, format!("unknown linkage {v:?}")))?
            }
            "threshold_grid" => {
                self.threshold_grid = v
                    .split(',')
                    .map(|t| parse_num(key, t.trim()))
                    .collect::<Result<_>>()?
            }
            "seed" => self.seed = parse_num(key, v)?,
            "vad_percentile" => self.vad_percentile = parse_num(key, v)?,
            "vad_offset_db" => self.vad_offset_db = parse_num(key, v)?,
            "vad_floor_db" => self.vad_floor_db = parse_num(key, v)?,
            "vad_median" => self.vad_median = parse_num(key, v)?,
            "vad_min_dur_s" => self.vad_min_dur_s = parse_num(key, v)?,
            "vad_bridge_s" => self.vad_bridge_s = parse_num(key, v)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(key, msg))
            }
        };
        check(self.sample_rate > 0, "sample_rate", "must be positive")?;
        check(self.stride_s > 0.0, "stride_s", "must be positive")?;
        check(self.window_s > self.stride_s, "window_s", "must exceed stride_s")?;
        check(self.spec_hop_ms > 0.0, "spec_hop_ms", "must be positive")?;
        check(self.spec_win_ms > 0.0, "spec_win_ms", "must be positive")?;
        check(
            (0.0..=1.0).contains(&self.missing_prob),
            "missing_prob",
            "must lie in [0, 1]",
        )?;
        check(self.lr > 0.0 && self.lr.is_finite(), "lr", "must be positive")?;
        check(self.batch_size >= 2, "batch_size", "must be at least 2")?;
        check(self.eval_every > 0, "eval_every", "must be positive")?;
        check(
            self.collar_s >= 0.0 && self.collar_s.is_finite(),
            "collar_s",
            "must be non-negative",
        )?;
        for (key, v) in [("c_audio", self.c_audio), ("c_face", self.c_face), ("h", self.h), ("w", self.w)] {
            check(v > 0, key, "must be positive")?;
        }
        check(!self.threshold_grid.is_empty(), "threshold_grid", "must not be empty")?;
        check(
            self.threshold_grid.iter().all(|t| (0.0..=1.0).contains(t)),
            "threshold_grid",
            "values must lie in [0, 1]",
        )?;
        check(
            self.threshold_grid.windows(2).all(|p| p[0] <= p[1]),
            "threshold_grid",
            "must be sorted ascending",
        )?;
        check(
            (0.0..=100.0).contains(&self.vad_percentile),
            "vad_percentile",
            "must lie in [0, 100]",
        )?;
        check(self.vad_median % 2 == 1, "vad_median", "must be odd")?;
        check(self.vad_min_dur_s >= 0.0, "vad_min_dur_s", "must be non-negative")?;
        check(self.vad_bridge_s >= 0.0, "vad_bridge_s", "must be non-negative")?;
        Ok(())
    }

    /// Channel count of the relation module input: both pairs, face and audio.
    pub fn relation_dim(&self) -> usize {
        (self.c_face + self.c_audio) * 2
    }

    pub fn win_samples(&self) -> usize {
        (self.spec_win_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.spec_hop_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    /// Renders the config in the same format [`Config::load`] reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let grid: Vec<String> = self.threshold_grid.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(s, "sample_rate = {}", self.sample_rate);
        let _ = writeln!(s, "window_s = {}", self.window_s);
        let _ = writeln!(s, "stride_s = {}", self.stride_s);
        let _ = writeln!(s, "spec_hop_ms = {}", self.spec_hop_ms);
        let _ = writeln!(s, "spec_win_ms = {}", self.spec_win_ms);
        let _ = writeln!(s, "missing_prob = {}", self.missing_prob);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "eval_every = {}", self.eval_every);
        let _ = writeln!(s, "collar_s = {}", self.collar_s);
        let _ = writeln!(s, "c_audio = {}", self.c_audio);
        let _ = writeln!(s, "c_face = {}", self.c_face);
        let _ = writeln!(s, "h = {}", self.h);
        let _ = writeln!(s, "w = {}", self.w);
        let _ = writeln!(s, "linkage = {}", self.linkage);
        let _ = writeln!(s, "threshold_grid = {}", grid.join(","));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "vad_percentile = {}", self.vad_percentile);
        let _ = writeln!(s, "vad_offset_db = {}", self.vad_offset_db);
        let _ = writeln!(s, "vad_floor_db = {}", self.vad_floor_db);
        let _ = writeln!(s, "vad_median = {}", self.vad_median);
        let _ = writeln!(s, "vad_min_dur_s = {}", self.vad_min_dur_s);
        let _ = writeln!(s, "vad_bridge_s = {}", self.vad_bridge_s);
        s
    }
}

pub fn load_config(text: &str) -> Result<Config> {
    Config::load(text)
}
