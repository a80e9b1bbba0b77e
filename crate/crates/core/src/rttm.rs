//! RTTM reading and writing.
//!
//! Only `SPEAKER` lines are understood. The ten whitespace-separated fields are
//! `SPEAKER file chan onset dur <NA> <NA> speaker <NA> <NA>`.

use std::fmt::Write as _;

use crate::{Error, Result, TimeInterval};

#[derive(Debug, Clone, PartialEq)]
pub struct RttmRecord {
    pub file_id: String,
    pub channel: u32,
    pub interval: TimeInterval,
    pub speaker: String,
}

impl RttmRecord {
    pub fn new(
        file_id: impl Into<String>,
        channel: u32,
        interval: TimeInterval,
        speaker: impl Into<String>,
    ) -> Result<Self> {
        let rec = Self {
            file_id: file_id.into(),
            channel,
            interval,
            speaker: speaker.into(),
        };
        rec.validate()?;
        Ok(rec)
    }

    fn validate(&self) -> Result<()> {
        if self.speaker.is_empty() || self.speaker.chars().any(char::is_whitespace) {
            return Err(Error::InvalidRecord(format!(
                "speaker label {:?} must be a non-empty token",
                self.speaker
            )));
        }
        if self.file_id.is_empty() || self.file_id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidRecord(format!(
                "file id {:?} must be a non-empty token",
                self.file_id
            )));
        }
        Ok(())
    }
}

/// Result of [`parse_rttm_counted`]: the records plus how many non-`SPEAKER`
/// lines were skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedRttm {
    pub records: Vec<RttmRecord>,
    pub skipped: usize,
}

pub fn parse_rttm(text: &str) -> Result<Vec<RttmRecord>> {
    parse_rttm_counted(text).map(|p| p.records)
}

pub fn parse_rttm_counted(text: &str) -> Result<ParsedRttm> {
    let mut out = ParsedRttm::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] != "SPEAKER" {
            log::warn!("rttm line {line_no}: skipping record type {}", fields[0]);
            out.skipped += 1;
            continue;
        }
        out.records.push(parse_speaker_line(&fields, line_no)?);
    }
    Ok(out)
}

fn parse_speaker_line(fields: &[&str], line: usize) -> Result<RttmRecord> {
    let err = |msg: String| Error::RttmParse { line, msg };
    if fields.len() != 10 {
        return Err(err(format!("expected 10 fields, found {}", fields.len())));
    }
    let channel: u32 = fields[2]
        .parse()
        .map_err(|_| err(format!("bad channel {:?}", fields[2])))?;
    let onset = parse_time(fields[3]).ok_or_else(|| err(format!("bad onset {:?}", fields[3])))?;
    let dur = parse_time(fields[4]).ok_or_else(|| err(format!("bad duration {:?}", fields[4])))?;
    if dur <= 0.0 {
        return Err(err(format!("non-positive duration {dur}")));
    }
    if onset < 0.0 {
        return Err(err(format!("negative onset {onset}")));
    }
    // add in fixed point when possible so "3.40" + "2.10" lands on the double nearest 5.5
    let offset = match (parse_nanos(fields[3]), parse_nanos(fields[4])) {
        (Some(a), Some(b)) => (a + b) as f64 / 1e9,
        _ => onset + dur,
    };
    let interval = TimeInterval::new(onset, offset).map_err(|e| err(e.to_string()))?;
    RttmRecord::new(fields[1], channel, interval, fields[7]).map_err(|e| err(e.to_string()))
}

/// Plain decimal `[-]digits[.digits]` with at most nine fractional digits, in nanoseconds.
fn parse_nanos(s: &str) -> Option<i128> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || frac.len() > 9 || int.len() > 12 {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let int: i128 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac_val: i128 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    let v = int * 1_000_000_000 + frac_val * 10i128.pow(9 - frac.len() as u32);
    Some(if neg { -v } else { v })
}

fn parse_time(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn serialize_rttm(records: &[RttmRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(
            out,
            "SPEAKER {} {} {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
            r.file_id,
            r.channel,
            r.interval.onset(),
            r.interval.duration(),
            r.speaker
        );
    }
    out
}
