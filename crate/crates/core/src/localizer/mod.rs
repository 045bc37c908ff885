//! Template-matching relocalization of a BEV against an SD-map tile.
//!
//! The BEV is rotated into map-axis alignment using the prior heading and
//! resampled to the tile resolution, both are encoded, the encoded BEV is
//! slid over the encoded tile (masked cosine similarity, valid offsets
//! only), and the soft-argmax of the 2D softmax gives the position.

mod encoder;
mod matching;

pub use encoder::{FeatureEncoder, FeatureGrid, DISTANCE_CLAMP};
pub use matching::{match_template, soft_argmax, softmax2d, ProbabilityMap, SimilarityMap};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::Rng;

use crate::bev::BevGrid;
use crate::geometry::EgoPose;
use crate::semantic_map::{crop_tile, MapTile, SemanticMap};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LocalizerConfig {
    /// `identity`, `pyramid` or `distance`.
    pub encoder: String,
    pub stride: usize,
    /// Pyramid levels (ignored by the other encoders).
    pub levels: usize,
    /// Softmax temperature.
    pub tau: f64,
    pub tile_side: f64,
    pub tile_resolution: f64,
    /// Prior perturbation radius, metres.
    pub r_max: f64,
    /// Optional heading sweep around the prior.
    pub rotation_sweep: bool,
    pub sweep_range_deg: f64,
    pub sweep_step_deg: f64,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        LocalizerConfig {
            encoder: "identity".into(),
            stride: 1,
            levels: 3,
            tau: 1.0,
            tile_side: 300.0,
            tile_resolution: 0.3,
            r_max: 100.0,
            rotation_sweep: false,
            sweep_range_deg: 2.0,
            sweep_step_deg: 1.0,
        }
    }
}

impl LocalizerConfig {
    pub fn validate(&self) -> Result<FeatureEncoder> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig("tau must be positive".into()));
        }
        if !(self.tile_side > 0.0 && self.tile_resolution > 0.0) {
            return Err(Error::InvalidConfig("tile side and resolution must be positive".into()));
        }
        if !(self.r_max >= 0.0 && self.r_max.is_finite()) {
            return Err(Error::InvalidConfig("r_max must be finite and >= 0".into()));
        }
        if self.rotation_sweep && !(self.sweep_step_deg > 0.0 && self.sweep_range_deg >= 0.0) {
            return Err(Error::InvalidConfig("rotation sweep needs a positive step".into()));
        }
        FeatureEncoder::from_name(&self.encoder, self.stride, self.levels)
    }
}

/// BEV scores resampled onto a map-axis-aligned grid at tile resolution,
/// centred on the ego position.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedBev {
    pub size: usize,
    pub channels: usize,
    pub resolution: f64,
    /// Channel-major.
    pub scores: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Rotates an ego-frame BEV by `yaw` into map axes and resamples it
/// (nearest cell) at `resolution`. Cells falling outside the source BEV or
/// on unobserved source cells are masked out.
pub fn align_bev(bev: &BevGrid, yaw: f64, resolution: f64) -> AlignedBev {
    let side = bev.size as f64 * bev.resolution;
    let size = (libm::round(side / resolution) as usize).max(1);
    let (s, c) = libm::sincos(yaw);
    let half_src = bev.size as f64 * 0.5;
    let half_dst = size as f64 * 0.5;
    let plane = size * size;
    let src_plane = bev.size * bev.size;
    let mut out = AlignedBev {
        size,
        channels: bev.channels,
        resolution,
        scores: vec![0.0; plane * bev.channels],
        mask: vec![false; plane],
    };
    for row in 0..size {
        let dy = (row as f64 + 0.5 - half_dst) * resolution;
        for col in 0..size {
            let dx = (col as f64 + 0.5 - half_dst) * resolution;
            // Map-axis offset → ego frame: R(−yaw).
            let ex = c * dx + s * dy;
            let ey = -s * dx + c * dy;
            let sc = libm::floor(ex / bev.resolution + half_src);
            let sr = libm::floor(ey / bev.resolution + half_src);
            if sc < 0.0 || sr < 0.0 || sc >= bev.size as f64 || sr >= bev.size as f64 {
                continue;
            }
            let src = sr as usize * bev.size + sc as usize;
            if !bev.mask[src] {
                continue;
            }
            let dst = row * size + col;
            out.mask[dst] = true;
            for ch in 0..bev.channels {
                out.scores[ch * plane + dst] = bev.scores[ch * src_plane + src];
            }
        }
    }
    out
}

/// Encoded-cell mask: a cell is observed if any of its input cells is.
fn encode_mask(mask: &[bool], size: usize, stride: usize) -> (Vec<bool>, usize) {
    if stride == 1 {
        return (mask.to_vec(), size);
    }
    let out = size / stride;
    let mut m = vec![false; out * out];
    for r in 0..out * stride {
        for c in 0..out * stride {
            if mask[r * size + c] {
                m[(r / stride) * out + c / stride] = true;
            }
        }
    }
    (m, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    /// Soft-argmax estimate in the map frame; heading from the prior (or
    /// the best sweep candidate).
    pub estimate: EgoPose,
    /// Continuous soft-argmax `(row, col)` in encoded similarity-map cells.
    pub peak: [f64; 2],
    /// Largest entry of the probability map.
    pub peak_prob: f64,
    /// Integer argmax `(row, col)` of the similarity map and its pose.
    pub argmax: (usize, usize),
    pub argmax_estimate: EgoPose,
    pub similarity: SimilarityMap,
    pub probability: ProbabilityMap,
}

struct Placement {
    origin: [f64; 2],
    resolution: f64,
    stride: usize,
    bev_center: f64,
}

impl Placement {
    /// Map-frame position of the ego for similarity index `(i, j)`.
    fn position(&self, i: f64, j: f64) -> [f64; 2] {
        let s = self.stride as f64;
        [
            self.origin[0] + (j * s + self.bev_center) * self.resolution,
            self.origin[1] + (i * s + self.bev_center) * self.resolution,
        ]
    }
}

/// Localizes `bev` against a tile of `map` cropped around `prior`.
pub fn localize(
    bev: &BevGrid,
    map: &SemanticMap,
    prior: &EgoPose,
    cfg: &LocalizerConfig,
) -> Result<LocalizationResult> {
    let encoder = cfg.validate()?;
    if !prior.yaw.is_finite() {
        return Err(Error::MissingHeading);
    }
    if bev.channels != map.num_categories() {
        return Err(Error::ShapeMismatch("BEV channels must equal map categories".into()));
    }
    let tile = crop_tile(map, prior, cfg.tile_side, cfg.tile_resolution)?;
    localize_in_tile(bev, &tile, prior, cfg, &encoder)
}

/// Like [`localize`] with a pre-cropped tile.
pub fn localize_in_tile(
    bev: &BevGrid,
    tile: &MapTile,
    prior: &EgoPose,
    cfg: &LocalizerConfig,
    encoder: &FeatureEncoder,
) -> Result<LocalizationResult> {
    let raster = &tile.raster;
    let res = f64::from(raster.resolution);
    let tile_planes: Vec<f64> = raster.data.iter().map(|&v| f64::from(v)).collect();
    let tile_f = encoder.encode(&tile_planes, raster.width, raster.height, raster.channels, res)?;

    let yaws: Vec<f64> = if cfg.rotation_sweep {
        let n = libm::floor(cfg.sweep_range_deg / cfg.sweep_step_deg) as i64;
        (-n..=n)
            .map(|k| prior.yaw + (k as f64 * cfg.sweep_step_deg).to_radians())
            .collect()
    } else {
        vec![prior.yaw]
    };

    let mut best: Option<(f64, f64, SimilarityMap, usize)> = None;
    for &yaw in &yaws {
        let aligned = align_bev(bev, yaw, res);
        let bev_f = encoder.encode(&aligned.scores, aligned.size, aligned.size, aligned.channels, res)?;
        let (mask, _) = encode_mask(&aligned.mask, aligned.size, encoder.stride());
        if bev_f.width > tile_f.width || bev_f.height > tile_f.height {
            return Err(Error::BevLargerThanTile {
                bev: bev_f.width,
                tile: tile_f.width,
            });
        }
        let sim = match_template(&bev_f, &mask, &tile_f)?;
        let top = sim.scores.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        if best.as_ref().is_none_or(|b| top > b.0) {
            best = Some((top, yaw, sim, aligned.size));
        }
    }
    let (_, yaw, similarity, aligned_size) = best.expect("at least one heading candidate");

    let probability = softmax2d(&similarity, cfg.tau)?;
    let peak = soft_argmax(&probability);
    let peak_prob = probability.probs.iter().fold(0.0f64, |m, &v| m.max(v));
    let argmax = similarity.argmax();
    let place = Placement {
        origin: [f64::from(raster.origin[0]), f64::from(raster.origin[1])],
        resolution: res,
        stride: encoder.stride(),
        bev_center: aligned_size as f64 * 0.5 - 0.5,
    };
    let p = place.position(peak[0], peak[1]);
    let a = place.position(argmax.0 as f64, argmax.1 as f64);
    Ok(LocalizationResult {
        estimate: EgoPose::new(p[0], p[1], yaw),
        peak,
        peak_prob,
        argmax,
        argmax_estimate: EgoPose::new(a[0], a[1], yaw),
        similarity,
        probability,
    })
}

/// Prior sampled around `pose`: direction uniform on the circle, radius
/// uniform on `[0, r_max]`, heading unchanged.
pub fn perturb<R: Rng + ?Sized>(pose: &EgoPose, rng: &mut R, r_max: f64) -> EgoPose {
    let theta = rng.gen_range(0.0..TAU);
    let r = if r_max > 0.0 { rng.gen_range(0.0..=r_max) } else { 0.0 };
    let (s, c) = libm::sincos(theta);
    EgoPose::new(pose.x + r * c, pose.y + r * s, pose.yaw)
}
