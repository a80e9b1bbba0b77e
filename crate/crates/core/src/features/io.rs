//! On-disk corpus layout.
//!
//! ```text
//! <dir>/meta.txt            noise_sigma and dims
//! <dir>/manifest.csv        video_id,pair,onset,offset,speaker,visible,file
//! <dir>/speakers.csv        video_id,label,off_screen
//! <dir>/rttm/<video>.rttm   reference diarization
//! <dir>/feats/<video>_<pair>.bin
//! ```
//!
//! A `.bin` pair file is little-endian: magic `AVPF`, `u32` version, `u8`
//! visibility, three pad bytes, `u32` audio `c h w`, `u32` face `c h w`
//! (zeros when there is no face), then audio and face values as `f32`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AVPairFeatures, Corpus, FeatureMap, SpeakerInfo, Video};
use crate::diarization::normalize_diarization;
use crate::rttm::{parse_rttm, serialize_rttm};
use crate::{Error, Result, TimeInterval};

const PAIR_MAGIC: &[u8; 4] = b"AVPF";
const PAIR_VERSION: u32 = 1;

pub fn encode_pair(pair: &AVPairFeatures) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(PAIR_MAGIC);
    out.extend_from_slice(&PAIR_VERSION.to_le_bytes());
    out.extend_from_slice(&[pair.visible as u8, 0, 0, 0]);
    let (ac, ah, aw) = pair.audio.shape();
    let (fc, fh, fw) = pair.face.as_ref().map_or((0, 0, 0), FeatureMap::shape);
    for d in [ac, ah, aw, fc, fh, fw] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    let face = pair.face.iter().flat_map(|f| f.data.iter());
    for &v in pair.audio.data.iter().chain(face) {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let s = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn map(&mut self, c: usize, h: usize, w: usize) -> Option<Vec<f64>> {
        (0..c * h * w)
            .map(|_| self.take(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64))
            .collect()
    }
}

/// Decodes the feature payload; segment and ids come from the manifest.
pub fn decode_pair(
    bytes: &[u8],
    segment: TimeInterval,
    video_id: &str,
    speaker: Option<String>,
) -> std::result::Result<AVPairFeatures, String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4) != Some(PAIR_MAGIC.as_slice()) {
        return Err("bad magic".into());
    }
    let version = r.u32().ok_or("truncated header")?;
    if version != PAIR_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let visible = r.take(4).ok_or("truncated header")?[0] != 0;
    let mut dims = [0usize; 6];
    for d in dims.iter_mut() {
        *d = r.u32().ok_or("truncated header")? as usize;
    }
    let audio = r.map(dims[0], dims[1], dims[2]).ok_or("truncated audio payload")?;
    let audio = FeatureMap::from_vec(dims[0], dims[1], dims[2], audio).map_err(|e| e.to_string())?;
    let face = if dims[3] * dims[4] * dims[5] > 0 {
        let data = r.map(dims[3], dims[4], dims[5]).ok_or("truncated face payload")?;
        Some(FeatureMap::from_vec(dims[3], dims[4], dims[5], data).map_err(|e| e.to_string())?)
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err("trailing bytes".into());
    }
    if visible && face.is_none() {
        return Err("visible pair without a face".into());
    }
    Ok(AVPairFeatures {
        audio,
        face,
        visible,
        segment,
        video_id: video_id.to_string(),
        true_speaker: speaker,
    })
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("rttm"))?;
    fs::create_dir_all(dir.join("feats"))?;
    let mut meta = format!("noise_sigma={}\n", corpus.noise_sigma);
    if let Some((ca, cf, h, w)) = corpus.dims() {
        let _ = write!(meta, "c_audio={ca}\nc_face={cf}\nh={h}\nw={w}\n");
    }
    fs::write(dir.join("meta.txt"), meta)?;

    let mut manifest = String::from("video_id,pair,onset,offset,speaker,visible,file\n");
    let mut speakers = String::from("video_id,label,off_screen\n");
    for v in &corpus.videos {
        for s in &v.speakers {
            let _ = writeln!(speakers, "{},{},{}", v.video_id, s.label, s.off_screen as u8);
        }
        for (k, p) in v.pairs.iter().enumerate() {
            let file = format!("{}_{:04}.bin", v.video_id, k);
            let _ = writeln!(
                manifest,
                "{},{},{:.3},{:.3},{},{},{}",
                v.video_id,
                k,
                p.segment.onset(),
                p.segment.offset(),
                p.true_speaker.as_deref().unwrap_or(""),
                p.visible as u8,
                file
            );
            fs::write(dir.join("feats").join(&file), encode_pair(p))?;
        }
        fs::write(
            dir.join("rttm").join(format!("{}.rttm", v.video_id)),
            serialize_rttm(&v.reference.to_records()),
        )?;
    }
    fs::write(dir.join("manifest.csv"), manifest)?;
    fs::write(dir.join("speakers.csv"), speakers)?;
    Ok(())
}

fn csv_rows(path: &Path, ncols: usize) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<String> = line.split(',').map(str::to_string).collect();
        if cols.len() != ncols {
            return Err(format_err(path, format!("line {}: expected {ncols} columns", i + 1)));
        }
        rows.push(cols);
    }
    Ok(rows)
}

pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    let meta_path = dir.join("meta.txt");
    let meta = fs::read_to_string(&meta_path)?;
    let noise_sigma = meta
        .lines()
        .find_map(|l| l.strip_prefix("noise_sigma="))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| format_err(&meta_path, "missing noise_sigma"))?;

    let manifest_path = dir.join("manifest.csv");
    let rows = csv_rows(&manifest_path, 7)?;
    let speaker_rows = csv_rows(&dir.join("speakers.csv"), 3)?;

    let mut videos: Vec<Video> = Vec::new();
    for row in rows {
        let video_id = &row[0];
        if videos.last().is_none_or(|v| &v.video_id != video_id) {
            let rttm_path = dir.join("rttm").join(format!("{video_id}.rttm"));
            let records = parse_rttm(&fs::read_to_string(&rttm_path)?)?;
            let mut reference = normalize_diarization(&records)?;
            reference.file_id = video_id.clone();
            let speakers = speaker_rows
                .iter()
                .filter(|s| &s[0] == video_id)
                .map(|s| SpeakerInfo {
                    label: s[1].clone(),
                    off_screen: s[2] == "1",
                    audio_prototype: Vec::new(),
                    face_prototype: Vec::new(),
                })
                .collect();
            videos.push(Video {
                video_id: video_id.clone(),
                speakers,
                pairs: Vec::new(),
                reference,
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| format_err(&manifest_path, format!("bad time {s:?}")))
        };
        let segment = TimeInterval::new(num(&row[2])?, num(&row[3])?)?;
        let speaker = (!row[4].is_empty()).then(|| row[4].clone());
        let feat_path = dir.join("feats").join(&row[6]);
        let bytes = fs::read(&feat_path)?;
        let pair = decode_pair(&bytes, segment, video_id, speaker)
            .map_err(|m| format_err(&feat_path, m))?;
        if pair.visible != (row[5] == "1") {
            return Err(format_err(&feat_path, "visibility disagrees with manifest"));
        }
        videos.last_mut().expect("pushed above").pairs.push(pair);
    }
    Ok(Corpus { videos, noise_sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{make_synthetic_corpus, CorpusSpec};

    #[test]
    fn corpus_round_trip() {
        let corpus = make_synthetic_corpus(&CorpusSpec { n_videos: 2, ..CorpusSpec::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&corpus, dir.path()).unwrap();
        let back = read_corpus(dir.path()).unwrap();
        assert_eq!(back.videos.len(), 2);
        assert_eq!(back.noise_sigma, corpus.noise_sigma);
        for (a, b) in corpus.videos.iter().zip(&back.videos) {
            // features are stored on the f32 grid, so pairs come back exactly
            assert_eq!(a.pairs, b.pairs);
            assert_eq!(a.reference, b.reference);
            assert_eq!(a.speakers.len(), b.speakers.len());
        }
    }

    #[test]
    fn rejects_corrupt_pair() {
        let seg = TimeInterval::new(0.0, 1.0).unwrap();
        assert!(decode_pair(b"XXXX", seg, "v", None).is_err());
        let pair = AVPairFeatures {
            audio: FeatureMap::from_vec(1, 1, 2, vec![1.0, 2.0]).unwrap(),
            face: None,
            visible: false,
            segment: seg,
            video_id: "v".into(),
            true_speaker: None,
        };
        let mut bytes = encode_pair(&pair);
        assert_eq!(decode_pair(&bytes, seg, "v", None).unwrap(), pair);
        bytes.pop();
        assert!(decode_pair(&bytes, seg, "v", None).is_err());
    }
}
