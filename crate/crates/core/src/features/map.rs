use crate::{Error, Result};

/// Dense `channels x height x width` tensor, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::DimMismatch(format!(
                "{} values for a {channels}x{height}x{width} map",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        Ok(Self { channels, height, width, data })
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.height + i) * self.width + j]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Bucket `k` of `n` over a length-`len` axis: `[floor(k*len/n), floor((k+1)*len/n))`.
pub(crate) fn bucket(k: usize, n: usize, len: usize) -> (usize, usize) {
    (k * len / n, (k + 1) * len / n)
}

/// Averages each spatial bucket, keeping channels.
pub fn adaptive_pool(map: &FeatureMap, out_h: usize, out_w: usize) -> Result<FeatureMap> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument("pooled size must be positive".into()));
    }
    if out_h > map.height || out_w > map.width {
        return Err(Error::DimMismatch(format!(
            "cannot pool {}x{} up to {out_h}x{out_w}",
            map.height, map.width
        )));
    }
    if out_h == map.height && out_w == map.width {
        return Ok(map.clone());
    }
    let mut out = FeatureMap::zeros(map.channels, out_h, out_w);
    for c in 0..map.channels {
        for i in 0..out_h {
            let (r0, r1) = bucket(i, out_h, map.height);
            for j in 0..out_w {
                let (c0, c1) = bucket(j, out_w, map.width);
                let mut sum = 0.0;
                for r in r0..r1 {
                    for q in c0..c1 {
                        sum += map.get(c, r, q);
                    }
                }
                out.data[(c * out_h + i) * out_w + j] = sum / ((r1 - r0) * (c1 - c0)) as f64;
            }
        }
    }
    Ok(out)
}
