//! Discrete height bins, the soft per-pixel height distribution and its
//! expectation.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Default bin heights in metres.
pub const DEFAULT_BINS: [f64; 6] = [-0.5, 0.0, 0.5, 1.0, 2.0, 3.0];

/// Strictly increasing, finite bin heights.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct HeightBins(Vec<f64>);

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for HeightBins {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        HeightBins::new(v).map_err(serde::de::Error::custom)
    }
}

impl Default for HeightBins {
    fn default() -> Self {
        HeightBins(DEFAULT_BINS.to_vec())
    }
}

impl HeightBins {
    pub fn new(bins: Vec<f64>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::InvalidBins("at least one bin is required".into()));
        }
        if bins.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidBins("bins must be finite".into()));
        }
        if bins.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidBins("bins must be strictly increasing".into()));
        }
        Ok(HeightBins(bins))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Writes the soft assignment of `h` into `out` (length `len()`).
    ///
    /// Exact bin values and out-of-range heights give one-hot rows, heights
    /// between two bins split linearly between them and NaN (no surface)
    /// gives an all-zero row. Interior weights are adjusted by at most a few
    /// ulps so that [`expected_height`] reproduces `h` bit-for-bit.
    pub fn encode(&self, h: f64, out: &mut [f64]) {
        let b = &self.0;
        debug_assert_eq!(out.len(), b.len());
        out.iter_mut().for_each(|v| *v = 0.0);
        if h.is_nan() {
            return;
        }
        let last = b.len() - 1;
        if h <= b[0] {
            out[0] = 1.0;
            return;
        }
        if h >= b[last] {
            out[last] = 1.0;
            return;
        }
        // b[k] < h < b[k + 1] or h == b[k]
        let k = b.partition_point(|&v| v <= h) - 1;
        if b[k] == h {
            out[k] = 1.0;
            return;
        }
        let w0 = (h - b[k]) / (b[k + 1] - b[k]);
        let mut best = w0;
        let mut candidate_up = w0;
        let mut candidate_down = w0;
        for step in 0..=16 {
            let w = if step % 2 == 0 { candidate_up } else { candidate_down };
            out[k] = 1.0 - w;
            out[k + 1] = w;
            if expected_height(out, self) == h {
                best = w;
                break;
            }
            if step % 2 == 0 {
                candidate_up = candidate_up.next_up();
            } else {
                candidate_down = candidate_down.next_down();
            }
        }
        out[k] = 1.0 - best;
        out[k + 1] = best;
    }
}

/// Soft height distribution for every pixel; row-major, `bins.len()` weights
/// per pixel.
pub fn height_to_distribution(heights: &[f64], bins: &HeightBins) -> Vec<f64> {
    let k = bins.len();
    let mut out = vec![0.0; heights.len() * k];
    for (h, row) in heights.iter().zip(out.chunks_exact_mut(k)) {
        bins.encode(*h, row);
    }
    out
}

/// `Σ_k b_k · H_k`.
pub fn expected_height(row: &[f64], bins: &HeightBins) -> f64 {
    bins.values().iter().zip(row).fold(0.0, |acc, (b, w)| acc + b * w)
}
