//! Deterministic raster → feature-grid encoders.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Clamp of the signed distance encoder, metres.
pub const DISTANCE_CLAMP: f64 = 10.0;

/// Channel-major feature planes on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Input cells per output cell along each axis.
    pub stride: usize,
    pub data: Vec<f64>,
}

impl FeatureGrid {
    pub fn zeros(width: usize, height: usize, channels: usize, stride: usize) -> Self {
        FeatureGrid {
            width,
            height,
            channels,
            stride,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.data[(c * self.height + row) * self.width + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureEncoder {
    Identity,
    /// Box averages over windows of `stride·2^l` cells, `l < levels`,
    /// centred on each output block.
    Pyramid {
        stride: usize,
        levels: usize,
    },
    /// Signed Euclidean distance (metres) to the category boundary:
    /// positive outside, negative inside, clamped to ±10 m, then
    /// block-averaged by `stride`.
    Distance {
        stride: usize,
    },
}

impl FeatureEncoder {
    pub fn from_name(name: &str, stride: usize, levels: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidConfig("encoder stride must be >= 1".into()));
        }
        match name {
            "identity" if stride == 1 => Ok(FeatureEncoder::Identity),
            "identity" => Err(Error::InvalidConfig("identity encoder has stride 1".into())),
            "pyramid" if levels == 0 => Err(Error::InvalidConfig("pyramid needs >= 1 level".into())),
            "pyramid" => Ok(FeatureEncoder::Pyramid { stride, levels }),
            "distance" => Ok(FeatureEncoder::Distance { stride }),
            other => Err(Error::UnknownEncoder(other.to_string())),
        }
    }

    pub fn name(&self) -> String {
        match self {
            FeatureEncoder::Identity => "identity",
            FeatureEncoder::Pyramid { .. } => "pyramid",
            FeatureEncoder::Distance { .. } => "distance",
        }
        .to_string()
    }

    pub fn stride(&self) -> usize {
        match *self {
            FeatureEncoder::Identity => 1,
            FeatureEncoder::Pyramid { stride, .. } | FeatureEncoder::Distance { stride } => stride,
        }
    }

    pub fn output_channels(&self, input: usize) -> usize {
        match *self {
            FeatureEncoder::Pyramid { levels, .. } => input * levels,
            _ => input,
        }
    }

    /// Encodes channel-major planes of `width × height` cells of side
    /// `resolution` metres.
    pub fn encode(
        &self,
        planes: &[f64],
        width: usize,
        height: usize,
        channels: usize,
        resolution: f64,
    ) -> Result<FeatureGrid> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::ShapeMismatch("cannot encode an empty raster".into()));
        }
        if planes.len() != width * height * channels {
            return Err(Error::ShapeMismatch("raster data length".into()));
        }
        let n = width * height;
        match *self {
            FeatureEncoder::Identity => Ok(FeatureGrid {
                width,
                height,
                channels,
                stride: 1,
                data: planes.to_vec(),
            }),
            FeatureEncoder::Pyramid { stride, levels } => {
                let (ow, oh) = (width / stride, height / stride);
                let mut out = FeatureGrid::zeros(ow, oh, channels * levels, stride);
                for c in 0..channels {
                    let sat = SummedArea::new(&planes[c * n..(c + 1) * n], width, height);
                    for l in 0..levels {
                        let win = stride << l;
                        let back = (win - stride) / 2;
                        let dst = out.channel_mut(c * levels + l);
                        for r in 0..oh {
                            for q in 0..ow {
                                let r0 = (r * stride) as i64 - back as i64;
                                let c0 = (q * stride) as i64 - back as i64;
                                dst[r * ow + q] = sat.mean(r0, c0, win, width, height);
                            }
                        }
                    }
                }
                Ok(out)
            }
            FeatureEncoder::Distance { stride } => {
                let mut sdf = vec![0.0; planes.len()];
                for c in 0..channels {
                    signed_distance(
                        &planes[c * n..(c + 1) * n],
                        width,
                        height,
                        resolution,
                        &mut sdf[c * n..(c + 1) * n],
                    );
                }
                if stride == 1 {
                    return Ok(FeatureGrid {
                        width,
                        height,
                        channels,
                        stride: 1,
                        data: sdf,
                    });
                }
                let (ow, oh) = (width / stride, height / stride);
                let mut out = FeatureGrid::zeros(ow, oh, channels, stride);
                for c in 0..channels {
                    let sat = SummedArea::new(&sdf[c * n..(c + 1) * n], width, height);
                    let dst = out.channel_mut(c);
                    for r in 0..oh {
                        for q in 0..ow {
                            dst[r * ow + q] = sat.mean((r * stride) as i64, (q * stride) as i64, stride, width, height);
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Summed-area table with a zero first row/column.
struct SummedArea {
    w: usize,
    sums: Vec<f64>,
}

impl SummedArea {
    fn new(plane: &[f64], w: usize, h: usize) -> Self {
        let mut sums = vec![0.0; (w + 1) * (h + 1)];
        for r in 0..h {
            let mut row = 0.0;
            for c in 0..w {
                row += plane[r * w + c];
                sums[(r + 1) * (w + 1) + c + 1] = sums[r * (w + 1) + c + 1] + row;
            }
        }
        SummedArea { w, sums }
    }

    /// Mean over the in-bounds part of the `win × win` window at `(r0, c0)`.
    fn mean(&self, r0: i64, c0: i64, win: usize, w: usize, h: usize) -> f64 {
        let ra = r0.clamp(0, h as i64) as usize;
        let rb = (r0 + win as i64).clamp(0, h as i64) as usize;
        let ca = c0.clamp(0, w as i64) as usize;
        let cb = (c0 + win as i64).clamp(0, w as i64) as usize;
        let count = (rb - ra) * (cb - ca);
        if count == 0 {
            return 0.0;
        }
        let s = &self.sums;
        let ww = self.w + 1;
        let total = s[rb * ww + cb] - s[ra * ww + cb] - s[rb * ww + ca] + s[ra * ww + ca];
        total / count as f64
    }
}

/// 1D squared Euclidean distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    let mut first = None;
    for q in 0..n {
        if f[q].is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(q0) = first else {
        out.fill(f64::INFINITY);
        return;
    };
    v[0] = q0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in q0 + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                // k > 0 always holds here because z[0] = −∞.
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Squared distance (cells²) from every cell to the nearest cell with
/// `target[i]`; infinite if there is none.
fn squared_edt(target: &[bool], w: usize, h: usize) -> Vec<f64> {
    let mut g = vec![0.0; w * h];
    let m = w.max(h);
    let (mut f, mut out) = (vec![0.0; m], vec![0.0; m]);
    let (mut v, mut z) = (vec![0usize; m], vec![0.0; m + 1]);
    for c in 0..w {
        for r in 0..h {
            f[r] = if target[r * w + c] { 0.0 } else { f64::INFINITY };
        }
        edt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for r in 0..h {
            g[r * w + c] = out[r];
        }
    }
    for r in 0..h {
        f[..w].copy_from_slice(&g[r * w..(r + 1) * w]);
        edt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        g[r * w..(r + 1) * w].copy_from_slice(&out[..w]);
    }
    g
}

fn signed_distance(plane: &[f64], w: usize, h: usize, resolution: f64, out: &mut [f64]) {
    let set: Vec<bool> = plane.iter().map(|&v| v >= 0.5).collect();
    let unset: Vec<bool> = set.iter().map(|&s| !s).collect();
    let to_set = squared_edt(&set, w, h);
    let to_unset = squared_edt(&unset, w, h);
    for i in 0..w * h {
        let d = if set[i] {
            -libm::sqrt(to_unset[i]) * resolution
        } else {
            libm::sqrt(to_set[i]) * resolution
        };
        out[i] = d.clamp(-DISTANCE_CLAMP, DISTANCE_CLAMP);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_identity() {
        let data: Vec<f64> = (0..24).map(|i| (i % 3) as f64).collect();
        let g = FeatureEncoder::Identity.encode(&data, 4, 3, 2, 0.3).unwrap();
        assert_eq!(g.data, data);
    }

    #[test]
    fn pyramid_of_constant_is_constant() {
        let data = vec![0.7; 2 * 16 * 12];
        let enc = FeatureEncoder::from_name("pyramid", 2, 3).unwrap();
        let g = enc.encode(&data, 16, 12, 2, 0.3).unwrap();
        assert_eq!((g.width, g.height, g.channels), (8, 6, 6));
        assert!(g.data.iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn distance_of_single_cell() {
        let (w, h) = (9, 7);
        let mut data = vec![0.0; w * h];
        data[3 * w + 4] = 1.0;
        let g = FeatureEncoder::Distance { stride: 1 }
            .encode(&data, w, h, 1, 0.5)
            .unwrap();
        for r in 0..h {
            for c in 0..w {
                let expect = if (r, c) == (3, 4) {
                    -0.5
                } else {
                    let d2 = ((r as f64 - 3.0).powi(2) + (c as f64 - 4.0).powi(2)).sqrt();
                    d2 * 0.5
                };
                assert!((g.get(0, r, c) - expect).abs() < 1e-12, "{r} {c}");
            }
        }
    }

    #[test]
    fn empty_channel_clamps() {
        let g = FeatureEncoder::Distance { stride: 1 }
            .encode(&[0.0; 16], 4, 4, 1, 1.0)
            .unwrap();
        assert!(g.data.iter().all(|&v| v == DISTANCE_CLAMP));
    }

    #[test]
    fn unknown_name_rejected() {
        assert_eq!(
            FeatureEncoder::from_name("qatm", 1, 1),
            Err(Error::UnknownEncoder("qatm".into()))
        );
    }
}
