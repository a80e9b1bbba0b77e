//! Model checkpoint: magic `AVRN`, `u32` version, `u32` dims
//! `c_audio c_face h w`, `f64` threshold, `u64` parameter count, then the
//! parameters as little-endian `f64`.

use super::model::{ModelDims, RelationModel};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"AVRN";
const VERSION: u32 = 1;

pub fn write_checkpoint(model: &RelationModel, threshold: f64) -> Vec<u8> {
    let d = model.dims();
    let params = model.params();
    let mut out = Vec::with_capacity(40 + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [d.c_audio, d.c_face, d.h, d.w] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&threshold.to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

fn bad(msg: &str) -> Error {
    Error::Format {
        path: "checkpoint".into(),
        msg: msg.into(),
    }
}

/// Returns the model and its stored clustering threshold.
pub fn read_checkpoint(bytes: &[u8]) -> Result<(RelationModel, f64)> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
    let version = u32_at(take(4)?);
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = u32_at(take(4)?) as usize;
    }
    let threshold = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
    let n = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let body = take(n.checked_mul(8).ok_or_else(|| bad("bad count"))?)?;
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(bad("threshold outside [0, 1]"));
    }
    let dims = ModelDims {
        c_audio: dims[0],
        c_face: dims[1],
        h: dims[2],
        w: dims[3],
    };
    Ok((RelationModel::from_params(dims, params)?, threshold))
}
