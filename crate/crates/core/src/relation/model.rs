//! Relation network parameters, forward pass and exact gradients.
//!
//! Input: two audio-visual pairs, each pooled to `h x w` and stacked as
//! `[face_l; audio_l; face_r; audio_r]`, giving `D = 2 (c_face + c_audio)`
//! channels. The tensor is scaled channel-wise by the mask of the pair's
//! visibility case, passed through two residual blocks
//! (`relu(x + conv(relu(conv(x))))`, 3x3, zero padding, width `D`),
//! global-average-pooled, and mapped by an affine head and a sigmoid.
//!
//! All parameters live in one flat `Vec<f64>`; [`Layout`] gives the ranges.

use std::ops::Range;

use rand_distr::{Distribution, Normal};

use crate::features::{adaptive_pool, AVPairFeatures, FeatureMap};
use crate::rng::Rng;
use crate::{Error, Result};

pub const NUM_CASES: usize = 4;
pub const NUM_BLOCKS: usize = 2;
const TAPS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub c_audio: usize,
    pub c_face: usize,
    pub h: usize,
    pub w: usize,
}

impl ModelDims {
    pub fn channels(&self) -> usize {
        2 * (self.c_face + self.c_audio)
    }

    pub fn positions(&self) -> usize {
        self.h * self.w
    }

    pub fn from_config(cfg: &crate::Config) -> Self {
        Self {
            c_audio: cfg.c_audio,
            c_face: cfg.c_face,
            h: cfg.h,
            w: cfg.w,
        }
    }
}

/// Offsets into the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    d: usize,
}

impl Layout {
    pub fn new(dims: &ModelDims) -> Self {
        Self { d: dims.channels() }
    }

    fn conv_len(&self) -> usize {
        self.d * TAPS * self.d
    }

    fn block_len(&self) -> usize {
        2 * (self.conv_len() + self.d)
    }

    fn block_start(&self, b: usize) -> usize {
        NUM_CASES * self.d + b * self.block_len()
    }

    pub fn mask(&self, case: usize) -> Range<usize> {
        case * self.d..(case + 1) * self.d
    }

    pub fn masks(&self) -> Range<usize> {
        0..NUM_CASES * self.d
    }

    /// Weights of conv `layer` (0 or 1) in block `b`, laid out `[out][tap][in]`.
    pub fn conv_weight(&self, b: usize, layer: usize) -> Range<usize> {
        let s = self.block_start(b) + layer * (self.conv_len() + self.d);
        s..s + self.conv_len()
    }

    pub fn conv_bias(&self, b: usize, layer: usize) -> Range<usize> {
        let s = self.conv_weight(b, layer).end;
        s..s + self.d
    }

    pub fn head_weight(&self) -> Range<usize> {
        let s = self.block_start(NUM_BLOCKS);
        s..s + self.d
    }

    pub fn head_bias(&self) -> usize {
        self.head_weight().end
    }

    pub fn len(&self) -> usize {
        self.head_bias() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Visibility case of an ordered pair of candidates:
/// 0 = A vs A, 1 = A vs A-V, 2 = A-V vs A, 3 = A-V vs A-V.
pub fn visibility_case(left: &AVPairFeatures, right: &AVPairFeatures) -> usize {
    (left.visible as usize) * 2 + right.visible as usize
}

/// Spatial neighbour tables for a 3x3 kernel with zero padding.
#[derive(Debug, Clone)]
struct Geometry {
    p: usize,
    /// `taps[k]` lists `(output position, input position)` for tap `k`.
    taps: Vec<Vec<(usize, usize)>>,
}

impl Geometry {
    fn new(h: usize, w: usize) -> Self {
        let mut taps = Vec::with_capacity(TAPS);
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let mut v = Vec::new();
                for r in 0..h as isize {
                    for c in 0..w as isize {
                        let (sr, sc) = (r + dy, c + dx);
                        if sr >= 0 && sr < h as isize && sc >= 0 && sc < w as isize {
                            v.push(((r * w as isize + c) as usize, (sr * w as isize + sc) as usize));
                        }
                    }
                }
                taps.push(v);
            }
        }
        Self { p: h * w, taps }
    }

    fn im2col(&self, x: &[f64], d: usize, col: &mut [f64]) {
        col.fill(0.0);
        for (k, tap) in self.taps.iter().enumerate() {
            for i in 0..d {
                let dst = &mut col[(k * d + i) * self.p..(k * d + i + 1) * self.p];
                let src = &x[i * self.p..(i + 1) * self.p];
                for &(p, q) in tap {
                    dst[p] = src[q];
                }
            }
        }
    }

    fn col2im_add(&self, dcol: &[f64], d: usize, dx: &mut [f64]) {
        for (k, tap) in self.taps.iter().enumerate() {
            for i in 0..d {
                let src = &dcol[(k * d + i) * self.p..(k * d + i + 1) * self.p];
                let dst = &mut dx[i * self.p..(i + 1) * self.p];
                for &(p, q) in tap {
                    dst[q] += src[p];
                }
            }
        }
    }
}

fn conv_forward(weight: &[f64], bias: &[f64], col: &[f64], d: usize, p: usize, out: &mut [f64]) {
    let rows = TAPS * d;
    for o in 0..d {
        let acc = &mut out[o * p..(o + 1) * p];
        acc.fill(bias[o]);
        let wrow = &weight[o * rows..(o + 1) * rows];
        for (r, &wv) in wrow.iter().enumerate() {
            let c = &col[r * p..(r + 1) * p];
            for (a, &x) in acc.iter_mut().zip(c) {
                *a += wv * x;
            }
        }
    }
}

/// Accumulates weight and bias gradients and writes the column gradient.
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    weight: &[f64],
    col: &[f64],
    dout: &[f64],
    d: usize,
    p: usize,
    dweight: &mut [f64],
    dbias: &mut [f64],
    dcol: &mut [f64],
) {
    let rows = TAPS * d;
    dcol.fill(0.0);
    for o in 0..d {
        let g = &dout[o * p..(o + 1) * p];
        dbias[o] += g.iter().sum::<f64>();
        let wrow = &weight[o * rows..(o + 1) * rows];
        let dwrow = &mut dweight[o * rows..(o + 1) * rows];
        for r in 0..rows {
            let c = &col[r * p..(r + 1) * p];
            let mut dot = 0.0;
            for (&gv, &cv) in g.iter().zip(c) {
                dot += gv * cv;
            }
            dwrow[r] += dot;
            let wv = wrow[r];
            let dc = &mut dcol[r * p..(r + 1) * p];
            for (dcv, &gv) in dc.iter_mut().zip(g) {
                *dcv += wv * gv;
            }
        }
    }
}

/// Intermediate values of one forward pass, kept for backward.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub case: usize,
    /// Unmasked stacked input.
    pub raw: Vec<f64>,
    blocks: Vec<BlockCache>,
    pooled: Vec<f64>,
    pub score: f64,
}

#[derive(Debug, Clone)]
struct BlockCache {
    col_in: Vec<f64>,
    pre1: Vec<f64>,
    col_mid: Vec<f64>,
    sum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationModel {
    dims: ModelDims,
    params: Vec<f64>,
}

impl RelationModel {
    /// Masks at one, He-normal conv weights, zero biases and a zero head,
    /// so every score starts at exactly 0.5.
    pub fn new(dims: ModelDims, rng: &mut Rng) -> Self {
        let mut m = Self::zeros(dims);
        let layout = m.layout();
        m.params[layout.masks()].fill(1.0);
        let d = dims.channels();
        let he = Normal::new(0.0, (2.0 / (TAPS * d) as f64).sqrt()).expect("valid std");
        for b in 0..NUM_BLOCKS {
            for layer in 0..2 {
                for v in &mut m.params[layout.conv_weight(b, layer)] {
                    *v = he.sample(rng);
                }
            }
        }
        m
    }

    pub fn zeros(dims: ModelDims) -> Self {
        let n = Layout::new(&dims).len();
        Self { dims, params: vec![0.0; n] }
    }

    pub fn from_params(dims: ModelDims, params: Vec<f64>) -> Result<Self> {
        let n = Layout::new(&dims).len();
        if params.len() != n {
            return Err(Error::DimMismatch(format!("{} parameters, expected {n}", params.len())));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(Self { dims, params })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.dims)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn mask(&self, case: usize) -> &[f64] {
        &self.params[self.layout().mask(case)]
    }

    /// Rows are the masks in visibility-case order.
    pub fn export_masks(&self) -> Vec<Vec<f64>> {
        (0..NUM_CASES).map(|k| self.mask(k).to_vec()).collect()
    }

    fn stack(&self, left: &AVPairFeatures, right: &AVPairFeatures) -> Result<Vec<f64>> {
        let ModelDims { c_audio, c_face, h, w } = self.dims;
        let p = h * w;
        let mut raw = Vec::with_capacity(self.dims.channels() * p);
        for side in [left, right] {
            if side.audio.channels != c_audio {
                return Err(Error::DimMismatch(format!(
                    "audio has {} channels, model expects {c_audio}",
                    side.audio.channels
                )));
            }
            match (&side.face, side.visible) {
                (Some(f), true) => {
                    if f.shape() != (c_face, h, w) {
                        return Err(Error::DimMismatch(format!(
                            "face is {:?}, model expects {:?}",
                            f.shape(),
                            (c_face, h, w)
                        )));
                    }
                    raw.extend_from_slice(&f.data);
                }
                (None, true) => {
                    return Err(Error::InvalidArgument("visible pair without a face".into()))
                }
                (_, false) => raw.extend(std::iter::repeat_n(0.0, c_face * p)),
            }
            let audio = adaptive_pool(&side.audio, h, w)?;
            raw.extend_from_slice(&audio.data);
        }
        Ok(raw)
    }

    /// Stacked, masked relation input as a `D x h x w` map.
    pub fn assemble_input(&self, left: &AVPairFeatures, right: &AVPairFeatures) -> Result<FeatureMap> {
        let raw = self.stack(left, right)?;
        let mask = self.mask(visibility_case(left, right));
        let p = self.dims.positions();
        let data = raw
            .chunks(p)
            .zip(mask)
            .flat_map(|(ch, &m)| ch.iter().map(move |v| v * m))
            .collect();
        FeatureMap::from_vec(self.dims.channels(), self.dims.h, self.dims.w, data)
    }

    pub fn forward(&self, left: &AVPairFeatures, right: &AVPairFeatures) -> Result<ForwardCache> {
        let raw = self.stack(left, right)?;
        let case = visibility_case(left, right);
        Ok(self.forward_raw(raw, case))
    }

    fn forward_raw(&self, raw: Vec<f64>, case: usize) -> ForwardCache {
        let layout = self.layout();
        let d = self.dims.channels();
        let geo = Geometry::new(self.dims.h, self.dims.w);
        let p = geo.p;
        let mask = &self.params[layout.mask(case)];
        let mut x: Vec<f64> = raw
            .chunks(p)
            .zip(mask)
            .flat_map(|(ch, &m)| ch.iter().map(move |v| v * m))
            .collect();

        let mut blocks = Vec::with_capacity(NUM_BLOCKS);
        for b in 0..NUM_BLOCKS {
            let mut col_in = vec![0.0; TAPS * d * p];
            geo.im2col(&x, d, &mut col_in);
            let mut pre1 = vec![0.0; d * p];
            conv_forward(
                &self.params[layout.conv_weight(b, 0)],
                &self.params[layout.conv_bias(b, 0)],
                &col_in,
                d,
                p,
                &mut pre1,
            );
            let mid: Vec<f64> = pre1.iter().map(|v| v.max(0.0)).collect();
            let mut col_mid = vec![0.0; TAPS * d * p];
            geo.im2col(&mid, d, &mut col_mid);
            let mut sum = vec![0.0; d * p];
            conv_forward(
                &self.params[layout.conv_weight(b, 1)],
                &self.params[layout.conv_bias(b, 1)],
                &col_mid,
                d,
                p,
                &mut sum,
            );
            for (s, xv) in sum.iter_mut().zip(&x) {
                *s += xv;
            }
            x = sum.iter().map(|v| v.max(0.0)).collect();
            blocks.push(BlockCache { col_in, pre1, col_mid, sum });
        }

        let pooled: Vec<f64> = x.chunks(p).map(|ch| ch.iter().sum::<f64>() / p as f64).collect();
        let hw = &self.params[layout.head_weight()];
        let logit = self.params[layout.head_bias()]
            + hw.iter().zip(&pooled).map(|(a, b)| a * b).sum::<f64>();
        ForwardCache {
            case,
            raw,
            blocks,
            pooled,
            score: sigmoid(logit),
        }
    }

    pub fn score_pair(&self, left: &AVPairFeatures, right: &AVPairFeatures) -> Result<f64> {
        Ok(self.forward(left, right)?.score)
    }

    /// Sign pattern of every ReLU input. Two parameter vectors with equal
    /// patterns lie in the same linear piece of the network.
    pub fn relu_pattern(&self, left: &AVPairFeatures, right: &AVPairFeatures) -> Result<Vec<bool>> {
        let cache = self.forward(left, right)?;
        Ok(cache
            .blocks
            .iter()
            .flat_map(|b| b.pre1.iter().chain(&b.sum).map(|v| *v > 0.0))
            .collect())
    }

    /// Adds `scale * d score / d params` into `grad`.
    pub fn backward_into(&self, cache: &ForwardCache, scale: f64, grad: &mut [f64]) {
        let layout = self.layout();
        let d = self.dims.channels();
        let geo = Geometry::new(self.dims.h, self.dims.w);
        let p = geo.p;

        let s = cache.score;
        let dlogit = scale * s * (1.0 - s);
        grad[layout.head_bias()] += dlogit;
        let hw_range = layout.head_weight();
        for (g, &v) in grad[hw_range.clone()].iter_mut().zip(&cache.pooled) {
            *g += dlogit * v;
        }
        // d/dy of the pooled mean
        let hw = &self.params[hw_range];
        let mut dy: Vec<f64> = hw
            .iter()
            .flat_map(|&wv| std::iter::repeat_n(dlogit * wv / p as f64, p))
            .collect();

        let mut dcol = vec![0.0; TAPS * d * p];
        for b in (0..NUM_BLOCKS).rev() {
            let bc = &cache.blocks[b];
            // y = relu(sum), sum = x + conv2(relu(conv1(x)))
            let dsum: Vec<f64> = dy
                .iter()
                .zip(&bc.sum)
                .map(|(g, v)| if *v > 0.0 { *g } else { 0.0 })
                .collect();
            let mut dx = dsum.clone();

            let (w2, b2) = (layout.conv_weight(b, 1), layout.conv_bias(b, 1));
            let (dw2, db2) = split_grad(grad, w2.clone(), b2);
            conv_backward(&self.params[w2], &bc.col_mid, &dsum, d, p, dw2, db2, &mut dcol);
            let mut dmid = vec![0.0; d * p];
            geo.col2im_add(&dcol, d, &mut dmid);
            for (g, v) in dmid.iter_mut().zip(&bc.pre1) {
                if *v <= 0.0 {
                    *g = 0.0;
                }
            }

            let (w1, b1) = (layout.conv_weight(b, 0), layout.conv_bias(b, 0));
            let (dw1, db1) = split_grad(grad, w1.clone(), b1);
            conv_backward(&self.params[w1], &bc.col_in, &dmid, d, p, dw1, db1, &mut dcol);
            geo.col2im_add(&dcol, d, &mut dx);
            dy = dx;
        }

        // masked input = raw * mask[case]
        let mrange = layout.mask(cache.case);
        for (c, g) in grad[mrange].iter_mut().enumerate() {
            let raw = &cache.raw[c * p..(c + 1) * p];
            let up = &dy[c * p..(c + 1) * p];
            *g += raw.iter().zip(up).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

fn split_grad(grad: &mut [f64], w: Range<usize>, b: Range<usize>) -> (&mut [f64], &mut [f64]) {
    debug_assert_eq!(w.end, b.start);
    let (head, tail) = grad[w.start..b.end].split_at_mut(w.len());
    (head, tail)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
