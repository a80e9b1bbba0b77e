use std::collections::BTreeMap;

use crate::{Error, Result, RttmRecord, TimeInterval};

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub interval: TimeInterval,
    pub speaker: String,
}

/// Speaker-labelled segments of one file. Segments of the same speaker never
/// overlap or touch; different speakers may overlap. Sorted by onset, then
/// speaker label.
#[derive(Debug, Clone, PartialEq)]
pub struct Diarization {
    pub file_id: String,
    pub segments: Vec<Segment>,
}

impl Diarization {
    /// Builds a normalized diarization from raw `(interval, speaker)` pairs.
    pub fn from_segments(file_id: impl Into<String>, segments: Vec<Segment>) -> Self {
        let mut by_speaker: BTreeMap<String, Vec<TimeInterval>> = BTreeMap::new();
        for s in segments {
            by_speaker.entry(s.speaker).or_default().push(s.interval);
        }
        let mut merged = Vec::new();
        for (speaker, mut ivs) in by_speaker {
            ivs.sort_by(|a, b| a.onset().total_cmp(&b.onset()));
            let mut cur: Option<TimeInterval> = None;
            for iv in ivs {
                cur = match cur {
                    Some(c) if c.touches(&iv) => Some(c.hull(&iv)),
                    Some(c) => {
                        merged.push(Segment { interval: c, speaker: speaker.clone() });
                        Some(iv)
                    }
                    None => Some(iv),
                };
            }
            if let Some(c) = cur {
                merged.push(Segment { interval: c, speaker: speaker.clone() });
            }
        }
        merged.sort_by(|a, b| {
            a.interval
                .onset()
                .total_cmp(&b.interval.onset())
                .then_with(|| a.speaker.cmp(&b.speaker))
        });
        Self {
            file_id: file_id.into(),
            segments: merged,
        }
    }

    pub fn empty(file_id: impl Into<String>) -> Self {
        Self {
            file_id: file_id.into(),
            segments: Vec::new(),
        }
    }

    /// Sorted, de-duplicated speaker labels.
    pub fn speakers(&self) -> Vec<String> {
        let mut s: Vec<String> = self.segments.iter().map(|s| s.speaker.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn total_speech(&self) -> f64 {
        self.segments.iter().map(|s| s.interval.duration()).sum()
    }

    /// Union of all speech, regardless of speaker.
    pub fn speech_regions(&self) -> Vec<TimeInterval> {
        let mut ivs: Vec<TimeInterval> = self.segments.iter().map(|s| s.interval).collect();
        ivs.sort_by(|a, b| a.onset().total_cmp(&b.onset()));
        let mut out: Vec<TimeInterval> = Vec::new();
        for iv in ivs {
            match out.last_mut() {
                Some(last) if last.touches(&iv) => *last = last.hull(&iv),
                _ => out.push(iv),
            }
        }
        out
    }

    pub fn to_records(&self) -> Vec<RttmRecord> {
        self.segments
            .iter()
            .map(|s| RttmRecord {
                file_id: self.file_id.clone(),
                channel: 1,
                interval: s.interval,
                speaker: s.speaker.clone(),
            })
            .collect()
    }
}

/// Groups records of a single file into a [`Diarization`], merging
/// overlapping or abutting same-speaker intervals.
pub fn normalize_diarization(records: &[RttmRecord]) -> Result<Diarization> {
    let Some(first) = records.first() else {
        return Ok(Diarization::empty(""));
    };
    if let Some(other) = records.iter().find(|r| r.file_id != first.file_id) {
        return Err(Error::MixedFiles(first.file_id.clone(), other.file_id.clone()));
    }
    let segs = records
        .iter()
        .map(|r| Segment {
            interval: r.interval,
            speaker: r.speaker.clone(),
        })
        .collect();
    Ok(Diarization::from_segments(first.file_id.clone(), segs))
}

/// Splits records by file id, normalizing each group. Output is sorted by file id.
pub fn group_by_file(records: &[RttmRecord]) -> Vec<Diarization> {
    let mut groups: BTreeMap<&str, Vec<RttmRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.file_id).or_default().push(r.clone());
    }
    groups
        .into_values()
        .map(|g| normalize_diarization(&g).expect("single file per group"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(spk: &str, a: f64, b: f64) -> RttmRecord {
        RttmRecord::new("f", 1, TimeInterval::new(a, b).unwrap(), spk).unwrap()
    }

    fn spans(d: &Diarization) -> Vec<(String, f64, f64)> {
        d.segments
            .iter()
            .map(|s| (s.speaker.clone(), s.interval.onset(), s.interval.offset()))
            .collect()
    }

    #[test]
    fn merges_abutting() {
        let d = normalize_diarization(&[rec("A", 0.0, 1.0), rec("A", 1.0, 2.0)]).unwrap();
        assert_eq!(spans(&d), vec![("A".into(), 0.0, 2.0)]);
    }

    #[test]
    fn keeps_cross_speaker_overlap() {
        let d = normalize_diarization(&[rec("A", 0.0, 2.0), rec("B", 1.0, 3.0)]).unwrap();
        assert_eq!(spans(&d), vec![("A".into(), 0.0, 2.0), ("B".into(), 1.0, 3.0)]);
    }

    #[test]
    fn merges_overlap() {
        let d = normalize_diarization(&[rec("A", 0.0, 2.0), rec("A", 1.0, 3.0)]).unwrap();
        assert_eq!(spans(&d), vec![("A".into(), 0.0, 3.0)]);
    }

    #[test]
    fn mixed_files_rejected() {
        let mut r = rec("A", 0.0, 1.0);
        r.file_id = "g".into();
        assert!(matches!(
            normalize_diarization(&[rec("A", 0.0, 1.0), r]),
            Err(Error::MixedFiles(..))
        ));
    }

    #[test]
    fn idempotent() {
        let d = normalize_diarization(&[
            rec("B", 4.0, 5.0),
            rec("A", 0.0, 2.0),
            rec("A", 1.5, 2.5),
            rec("B", 0.5, 1.0),
        ])
        .unwrap();
        let again = normalize_diarization(&d.to_records()).unwrap();
        assert_eq!(d, again);
        assert_eq!(d.speech_regions().len(), 2);
    }
}
