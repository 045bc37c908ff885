//! Multi-height inverse projective mapping of camera features into a
//! height-layered occupancy volume, and its flattening to a semantic BEV.
//!
//! BEV cell `(row, col)` of an `S × S` grid has its centre at
//! `((col + 0.5 − S/2)·res, (row + 0.5 − S/2)·res)` in the ego frame: columns
//! run along ego +x (forward), rows along ego +y (left). For even `S` this is
//! exactly the global raster lattice with `col0 = row0 = −S/2`.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{CameraRig, EgoPose, HeightLift, PlaneHomography};
use crate::par;
use crate::semantic_map::{rasterize_window, LatticeWindow, MapRaster};
use crate::synthworld::{CameraObservation, HeightBins, SurroundObservation, World};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BevSpec {
    /// Side length, metres.
    pub side: f64,
    /// Metres per cell.
    pub resolution: f64,
    pub bins: HeightBins,
}

impl Default for BevSpec {
    fn default() -> Self {
        BevSpec {
            side: 100.0,
            resolution: 0.5,
            bins: HeightBins::default(),
        }
    }
}

impl BevSpec {
    pub fn new(side: f64, resolution: f64, bins: HeightBins) -> Result<Self> {
        let spec = BevSpec { side, resolution, bins };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.side > 0.0 && self.side.is_finite()) {
            return Err(Error::InvalidBevSpec("side must be positive".into()));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::InvalidBevSpec("resolution must be positive".into()));
        }
        let s = self.side / self.resolution;
        if libm::fabs(s - libm::round(s)) > 1e-6 * s.max(1.0) || libm::round(s) < 1.0 {
            return Err(Error::InvalidBevSpec("side must be a whole number of cells".into()));
        }
        Ok(())
    }

    /// `S`, cells per side.
    pub fn size(&self) -> usize {
        libm::round(self.side / self.resolution) as usize
    }

    /// Ego-frame centre of a cell.
    #[inline]
    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        let half = self.size() as f64 * 0.5;
        [
            (col as f64 + 0.5 - half) * self.resolution,
            (row as f64 + 0.5 - half) * self.resolution,
        ]
    }

    /// The same extent at `factor`× coarser resolution.
    pub fn coarsened(&self, factor: usize) -> Result<BevSpec> {
        BevSpec::new(self.side, self.resolution * factor as f64, self.bins.clone())
    }
}

/// Per-pixel feature vectors of one camera, pixel-major (`(row·W + col)·C + c`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch("feature image data length".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("feature values must be finite".into()));
        }
        Ok(FeatureImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        FeatureImage {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    #[inline]
    pub fn pixel(&self, col: usize, row: usize) -> &[f64] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, col: usize, row: usize) -> &mut [f64] {
        let i = (row * self.width + col) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Indicator features of the map categories each pixel's surface
    /// belongs to; building, terrain and empty pixels are all-zero.
    pub fn one_hot(obs: &CameraObservation, num_categories: usize) -> Self {
        let mut img = FeatureImage::zeros(obs.width, obs.height, num_categories);
        for (px, &m) in img.data.chunks_exact_mut(num_categories).zip(&obs.memberships) {
            for (c, v) in px.iter_mut().enumerate() {
                *v = f64::from((m >> c) & 1);
            }
        }
        img
    }

    /// Box-average downsampling by an integer stride (partial edge blocks
    /// are averaged over their actual extent).
    pub fn downsampled(&self, stride: usize) -> Self {
        let (data, w, h) = box_downsample(&self.data, self.width, self.height, self.channels, stride);
        FeatureImage {
            width: w,
            height: h,
            channels: self.channels,
            data,
        }
    }
}

/// Per-pixel soft height-bin weights of one camera, pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightDistribution {
    pub width: usize,
    pub height: usize,
    pub bins: usize,
    pub data: Vec<f64>,
}

impl HeightDistribution {
    pub fn new(width: usize, height: usize, bins: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * bins {
            return Err(Error::ShapeMismatch("height distribution data length".into()));
        }
        if data.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::ShapeMismatch(
                "height weights must be finite and nonnegative".into(),
            ));
        }
        Ok(HeightDistribution {
            width,
            height,
            bins,
            data,
        })
    }

    pub fn from_heights(obs: &CameraObservation, bins: &HeightBins) -> Self {
        HeightDistribution {
            width: obs.width,
            height: obs.height,
            bins: bins.len(),
            data: crate::synthworld::height_to_distribution(&obs.heights, bins),
        }
    }

    #[inline]
    pub fn pixel(&self, col: usize, row: usize) -> &[f64] {
        let i = (row * self.width + col) * self.bins;
        &self.data[i..i + self.bins]
    }

    pub fn downsampled(&self, stride: usize) -> Self {
        let (data, w, h) = box_downsample(&self.data, self.width, self.height, self.bins, stride);
        HeightDistribution {
            width: w,
            height: h,
            bins: self.bins,
            data,
        }
    }
}

fn box_downsample(data: &[f64], w: usize, h: usize, c: usize, stride: usize) -> (Vec<f64>, usize, usize) {
    let stride = stride.max(1);
    let ow = w.div_ceil(stride);
    let oh = h.div_ceil(stride);
    let mut out = vec![0.0; ow * oh * c];
    for orow in 0..oh {
        for ocol in 0..ow {
            let o = (orow * ow + ocol) * c;
            let mut n = 0usize;
            for row in orow * stride..((orow + 1) * stride).min(h) {
                for col in ocol * stride..((ocol + 1) * stride).min(w) {
                    let i = (row * w + col) * c;
                    for k in 0..c {
                        out[o + k] += data[i + k];
                    }
                    n += 1;
                }
            }
            let inv = 1.0 / n as f64;
            for v in &mut out[o..o + c] {
                *v *= inv;
            }
        }
    }
    (out, ow, oh)
}

/// Oracle features and height distributions of a rendered observation.
pub fn oracle_inputs(obs: &SurroundObservation, bins: &HeightBins) -> (Vec<FeatureImage>, Vec<HeightDistribution>) {
    let feats = obs
        .cameras
        .iter()
        .map(|c| FeatureImage::one_hot(c, obs.num_categories))
        .collect();
    let dists = obs
        .cameras
        .iter()
        .map(|c| HeightDistribution::from_heights(c, bins))
        .collect();
    (feats, dists)
}

/// `S × S × K × C` accumulated features and `S × S × K` accumulated weights.
///
/// Layout: `features[((cell·K) + k)·C + c]`, `weights[cell·K + k]` with
/// `cell = row·S + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyVolume {
    pub size: usize,
    pub bins: usize,
    pub channels: usize,
    pub resolution: f64,
    pub features: Vec<f64>,
    pub weights: Vec<f64>,
}

impl OccupancyVolume {
    pub fn zeros(size: usize, bins: usize, channels: usize, resolution: f64) -> Self {
        OccupancyVolume {
            size,
            bins,
            channels,
            resolution,
            features: vec![0.0; size * size * bins * channels],
            weights: vec![0.0; size * size * bins],
        }
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize, k: usize) -> f64 {
        self.weights[(row * self.size + col) * self.bins + k]
    }

    #[inline]
    pub fn feature(&self, row: usize, col: usize, k: usize) -> &[f64] {
        let i = ((row * self.size + col) * self.bins + k) * self.channels;
        &self.features[i..i + self.channels]
    }
}

/// Semantic BEV: `S × S × N` scores (channel-major) and an observability mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BevGrid {
    pub size: usize,
    pub channels: usize,
    pub resolution: f64,
    pub scores: Vec<f64>,
    pub mask: Vec<bool>,
}

impl BevGrid {
    pub fn zeros(size: usize, channels: usize, resolution: f64) -> Self {
        BevGrid {
            size,
            channels,
            resolution,
            scores: vec![0.0; size * size * channels],
            mask: vec![false; size * size],
        }
    }

    #[inline]
    pub fn score(&self, c: usize, row: usize, col: usize) -> f64 {
        self.scores[(c * self.size + row) * self.size + col]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.size * self.size;
        &self.scores[c * n..(c + 1) * n]
    }

    /// Cells with `score ≥ threshold`, as a raster centred on the ego origin.
    pub fn binarize(&self, threshold: f64) -> MapRaster {
        let half = self.size as f64 * 0.5;
        let res = self.resolution;
        let origin = [((0.5 - half) * res) as f32, ((0.5 - half) * res) as f32];
        let mut r = MapRaster::zeros(self.size, self.size, self.channels, res as f32, origin);
        for (dst, &s) in r.data.iter_mut().zip(&self.scores) {
            *dst = (s >= threshold) as u8;
        }
        r
    }

    pub fn observed_cells(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[inline]
fn accumulate_bilinear(
    feat: &FeatureImage,
    dist: &HeightDistribution,
    k: usize,
    u: f64,
    v: f64,
    acc: &mut [f64],
    weight: &mut f64,
) {
    let w = feat.width;
    let h = feat.height;
    let c0 = (libm::floor(u) as usize).min(w.saturating_sub(2));
    let r0 = (libm::floor(v) as usize).min(h.saturating_sub(2));
    let fu = u - c0 as f64;
    let fv = v - r0 as f64;
    let taps = [
        (c0, r0, (1.0 - fu) * (1.0 - fv)),
        (c0 + 1, r0, fu * (1.0 - fv)),
        (c0, r0 + 1, (1.0 - fu) * fv),
        (c0 + 1, r0 + 1, fu * fv),
    ];
    for (col, row, a) in taps {
        if a == 0.0 || col >= w || row >= h {
            continue;
        }
        let hk = dist.pixel(col, row)[k];
        if hk == 0.0 {
            continue;
        }
        let s = a * hk;
        *weight += s;
        for (dst, f) in acc.iter_mut().zip(feat.pixel(col, row)) {
            *dst += s * f;
        }
    }
}

fn check_inputs(
    features: &[FeatureImage],
    dists: &[HeightDistribution],
    rig: &CameraRig,
    spec: &BevSpec,
) -> Result<usize> {
    spec.validate()?;
    if features.len() != rig.len() || dists.len() != rig.len() {
        return Err(Error::ShapeMismatch(
            "one feature image and height distribution per camera".into(),
        ));
    }
    let channels = features.first().map_or(0, |f| f.channels);
    for ((f, d), cam) in features.iter().zip(dists).zip(&rig.cameras) {
        let (w, h) = (cam.intrinsics.width(), cam.intrinsics.height());
        if f.width != w || f.height != h || d.width != w || d.height != h {
            return Err(Error::ShapeMismatch("image dimensions must match the rig".into()));
        }
        if f.channels != channels {
            return Err(Error::ShapeMismatch(
                "all feature images need the same channel count".into(),
            ));
        }
        if d.bins != spec.bins.len() {
            return Err(Error::ShapeMismatch("height distribution bin count".into()));
        }
    }
    Ok(channels)
}

/// Splats per-camera features into the height-layered volume.
///
/// Each cell centre is lifted to every bin height, projected into every
/// camera, and where it lands inside the image (λ > 0) the bilinearly
/// sampled `feature·H_k` and `H_k` are accumulated. Cameras are visited in
/// rig order.
pub fn project_to_volume(
    features: &[FeatureImage],
    dists: &[HeightDistribution],
    rig: &CameraRig,
    spec: &BevSpec,
) -> Result<OccupancyVolume> {
    let channels = check_inputs(features, dists, rig, spec)?;
    let s = spec.size();
    let bins = spec.bins.values();
    let nk = bins.len();
    let homographies: Vec<Vec<PlaneHomography>> = rig
        .cameras
        .iter()
        .map(|cam| bins.iter().map(|&b| cam.plane_homography(HeightLift(b))).collect())
        .collect();

    let rows: Vec<(Vec<f64>, Vec<f64>)> = par::map_range(s, |row| {
        let mut feat = vec![0.0; s * nk * channels];
        let mut wts = vec![0.0; s * nk];
        for col in 0..s {
            let p = spec.cell_center(row, col);
            for k in 0..nk {
                let cell = col * nk + k;
                let acc = &mut feat[cell * channels..(cell + 1) * channels];
                let mut w = 0.0;
                for (ci, hom) in homographies.iter().enumerate() {
                    let f = &features[ci];
                    let Some(pr) = hom[k].project(p) else { continue };
                    if !(pr.u >= 0.0 && pr.v >= 0.0 && pr.u <= (f.width - 1) as f64 && pr.v <= (f.height - 1) as f64) {
                        continue;
                    }
                    accumulate_bilinear(f, &dists[ci], k, pr.u, pr.v, acc, &mut w);
                }
                wts[cell] = w;
            }
        }
        (feat, wts)
    });

    let mut vol = OccupancyVolume::zeros(s, nk, channels, spec.resolution);
    let row_f = s * nk * channels;
    let row_w = s * nk;
    for (row, (f, w)) in rows.into_iter().enumerate() {
        vol.features[row * row_f..(row + 1) * row_f].copy_from_slice(&f);
        vol.weights[row * row_w..(row + 1) * row_w].copy_from_slice(&w);
    }
    Ok(vol)
}

/// `score_c = Σ_k acc_kc / Σ_k w_k` where `Σ_k w_k > 0`, else 0.
pub fn flatten_volume(vol: &OccupancyVolume) -> BevGrid {
    let s = vol.size;
    let (nk, nc) = (vol.bins, vol.channels);
    let mut grid = BevGrid::zeros(s, nc, vol.resolution);
    let plane = s * s;
    for cell in 0..plane {
        let wsum: f64 = vol.weights[cell * nk..(cell + 1) * nk].iter().sum();
        if !(wsum > 0.0) {
            continue;
        }
        grid.mask[cell] = true;
        for c in 0..nc {
            let mut acc = 0.0;
            for k in 0..nk {
                acc += vol.features[(cell * nk + k) * nc + c];
            }
            grid.scores[c * plane + cell] = acc / wsum;
        }
    }
    grid
}

/// Full oracle pipeline: one-hot features and soft heights from a rendered
/// observation, projected and flattened.
pub fn build_bev(obs: &SurroundObservation, rig: &CameraRig, spec: &BevSpec) -> Result<BevGrid> {
    let (feats, dists) = oracle_inputs(obs, &spec.bins);
    Ok(flatten_volume(&project_to_volume(&feats, &dists, rig, spec)?))
}

/// Multi-scale variant: features are box-downsampled by each stride and
/// projected with the correspondingly downscaled rig into a BEV of
/// `stride×` coarser resolution. Coarse levels are then upsampled
/// (nearest) to the finest level and fused by observation weight.
pub fn build_bev_pyramid(
    feats: &[FeatureImage],
    dists: &[HeightDistribution],
    rig: &CameraRig,
    spec: &BevSpec,
    strides: &[usize],
) -> Result<BevGrid> {
    if strides.is_empty() || strides.contains(&0) {
        return Err(Error::InvalidBevSpec("strides must be positive".into()));
    }
    let s = spec.size();
    let mut fused = BevGrid::zeros(s, feats.first().map_or(0, |f| f.channels), spec.resolution);
    let mut counts = vec![0u32; s * s];
    for &stride in strides {
        let level_spec = spec.coarsened(stride)?;
        let sl = level_spec.size();
        let (f, d): (Vec<_>, Vec<_>) = if stride == 1 {
            (feats.to_vec(), dists.to_vec())
        } else {
            (
                feats.iter().map(|f| f.downsampled(stride)).collect(),
                dists.iter().map(|d| d.downsampled(stride)).collect(),
            )
        };
        let level_rig = rig.downscaled(stride);
        let level = flatten_volume(&project_to_volume(&f, &d, &level_rig, &level_spec)?);
        let plane = s * s;
        for row in 0..s {
            for col in 0..s {
                let c = spec.cell_center(row, col);
                let lc = libm::floor(c[0] / level_spec.resolution + sl as f64 * 0.5);
                let lr = libm::floor(c[1] / level_spec.resolution + sl as f64 * 0.5);
                if lc < 0.0 || lr < 0.0 || lc >= sl as f64 || lr >= sl as f64 {
                    continue;
                }
                let (lr, lc) = (lr as usize, lc as usize);
                if !level.mask[lr * sl + lc] {
                    continue;
                }
                let cell = row * s + col;
                counts[cell] += 1;
                fused.mask[cell] = true;
                for ch in 0..fused.channels {
                    fused.scores[ch * plane + cell] += level.score(ch, lr, lc);
                }
            }
        }
    }
    let plane = s * s;
    for (cell, &n) in counts.iter().enumerate() {
        if n > 1 {
            for ch in 0..fused.channels {
                fused.scores[ch * plane + cell] /= n as f64;
            }
        }
    }
    Ok(fused)
}

/// Top-down rasterization of the world map in the ego frame of `pose`;
/// mask all-true.
pub fn oracle_bev(world: &World, pose: &EgoPose, spec: &BevSpec) -> Result<BevGrid> {
    spec.validate()?;
    let s = spec.size();
    let half = (s / 2) as i64;
    // Shift so that BEV centres coincide with lattice centres for odd S.
    let delta = (s as f64 * 0.5 - half as f64) * spec.resolution;
    let ego = world.map.in_ego_frame(pose);
    let ego = if delta != 0.0 {
        ego.transformed(|p| [p[0] + delta, p[1] + delta])
    } else {
        ego
    };
    let raster = rasterize_window(
        &ego,
        LatticeWindow {
            col0: -half,
            row0: -half,
            width: s,
            height: s,
        },
        spec.resolution as f32,
    );
    Ok(raster_to_grid(&raster, spec.resolution))
}

pub fn raster_to_grid(raster: &MapRaster, resolution: f64) -> BevGrid {
    debug_assert_eq!(raster.width, raster.height);
    BevGrid {
        size: raster.width,
        channels: raster.channels,
        resolution,
        scores: raster.data.iter().map(|&v| f64::from(v)).collect(),
        mask: vec![true; raster.width * raster.height],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Camera, CameraExtrinsics, CameraIntrinsics};
    use crate::linalg::{Mat3, Vec3};
    use crate::semantic_map::{Polygon, SemanticMap};
    use crate::synthworld::CATEGORY_NAMES;
    use alloc::string::ToString;

    fn nadir_rig() -> CameraRig {
        // Camera looking straight down: right = ego −y, down = ego −x.
        let r = Mat3::from_rows(
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, -1.0),
        );
        let t = -(r * Vec3::new(0.0, 0.0, 1.5));
        let cam = Camera::new(
            "nadir",
            CameraIntrinsics::new(100.0, 100.0, [50.0, 50.0], [101, 101]).unwrap(),
            CameraExtrinsics::new(r, t).unwrap(),
        )
        .unwrap();
        CameraRig::new(vec![cam]).unwrap()
    }

    #[test]
    fn principal_point_mass_lands_on_origin_cell() {
        let rig = nadir_rig();
        let spec = BevSpec::new(1.5, 0.5, HeightBins::default()).unwrap();
        let mut feat = FeatureImage::zeros(101, 101, 1);
        feat.pixel_mut(50, 50)[0] = 1.0;
        let mut h = vec![0.0; 101 * 101 * 6];
        for px in h.chunks_exact_mut(6) {
            px[1] = 1.0;
        }
        let dist = HeightDistribution::new(101, 101, 6, h).unwrap();
        let vol = project_to_volume(&[feat], &[dist], &rig, &spec).unwrap();
        for row in 0..3 {
            for col in 0..3 {
                for k in 0..6 {
                    let f = vol.feature(row, col, k)[0];
                    if (row, col, k) == (1, 1, 1) {
                        assert_eq!(f, 1.0);
                        assert_eq!(vol.weight(row, col, k), 1.0);
                    } else {
                        assert_eq!(f, 0.0);
                    }
                }
            }
        }
        let grid = flatten_volume(&vol);
        assert_eq!(grid.score(0, 1, 1), 1.0);
    }

    #[test]
    fn cells_behind_camera_get_no_weight() {
        let cam = Camera::new(
            "front",
            CameraIntrinsics::new(100.0, 100.0, [50.0, 50.0], [101, 101]).unwrap(),
            CameraExtrinsics::from_mount(Vec3::new(0.0, 0.0, 1.5), 0.0, 0.0),
        )
        .unwrap();
        let rig = CameraRig::new(vec![cam]).unwrap();
        let spec = BevSpec::new(20.0, 0.5, HeightBins::default()).unwrap();
        let feat = FeatureImage::zeros(101, 101, 1);
        let dist = HeightDistribution::new(101, 101, 6, vec![1.0; 101 * 101 * 6]).unwrap();
        let vol = project_to_volume(&[feat], &[dist], &rig, &spec).unwrap();
        let s = spec.size();
        let mut seen_front = false;
        for row in 0..s {
            for col in 0..s {
                let x = spec.cell_center(row, col)[0];
                let w: f64 = (0..6).map(|k| vol.weight(row, col, k)).sum();
                if x < 0.0 {
                    assert_eq!(w, 0.0);
                }
                seen_front |= w > 0.0;
            }
        }
        assert!(seen_front);
    }

    #[test]
    fn flatten_of_zero_volume_is_empty() {
        let vol = OccupancyVolume::zeros(4, 6, 3, 0.5);
        let g = flatten_volume(&vol);
        assert!(g.scores.iter().all(|&v| v == 0.0));
        assert!(g.mask.iter().all(|&m| !m));
    }

    #[test]
    fn flatten_single_layer_is_normalised_layer() {
        let mut vol = OccupancyVolume::zeros(2, 6, 2, 0.5);
        // cell 3, layer 0: weight 2, features (1, 0.5)
        vol.weights[3 * 6] = 2.0;
        vol.features[3 * 6 * 2] = 1.0;
        vol.features[3 * 6 * 2 + 1] = 0.5;
        let g = flatten_volume(&vol);
        assert_eq!(g.score(0, 1, 1), 0.5);
        assert_eq!(g.score(1, 1, 1), 0.25);
        assert_eq!(g.mask, vec![false, false, false, true]);
    }

    #[test]
    fn oracle_bev_rectangle_under_ego() {
        let mut map = SemanticMap::new(CATEGORY_NAMES.iter().map(|s| s.to_string()).collect());
        map.push(0, Polygon::rect([-1.0, -1.0], [1.0, 1.0]));
        let world = World {
            extent: 10.0,
            map,
            surface_heights: vec![0.0; 3],
            buildings: Vec::new(),
            roads: Vec::new(),
        };
        let spec = BevSpec::new(4.0, 0.5, HeightBins::default()).unwrap();
        let g = oracle_bev(&world, &EgoPose::new(0.0, 0.0, 0.0), &spec).unwrap();
        let s = spec.size();
        for row in 0..s {
            for col in 0..s {
                let [x, y] = spec.cell_center(row, col);
                let inside = x.abs() <= 1.0 && y.abs() <= 1.0;
                assert_eq!(g.score(0, row, col) == 1.0, inside, "{row} {col}");
            }
        }
        assert!(g.mask.iter().all(|&m| m));
    }

    #[test]
    fn spec_rejects_fractional_size() {
        assert!(BevSpec::new(10.0, 0.3, HeightBins::default()).is_err());
        assert_eq!(BevSpec::default().size(), 200);
    }
}
