//! Procedural SD-map worlds with 3D structure, and a raycaster that renders
//! surround-view semantic and height images from them.
//!
//! Worlds are irregular road grids: full-length roads along both axes with a
//! random subset of cross-street pieces removed, raised walkways around every
//! block, crossings near junctions and extruded buildings inside blocks.
//! Every polygon is an axis-aligned rectangle in the generated map, but the
//! renderer handles arbitrary (rotated) footprints.

mod heights;
mod render;

pub use heights::{expected_height, height_to_distribution, HeightBins, DEFAULT_BINS};
pub use render::{
    render_camera, render_surround, CameraObservation, RayScene, RenderOptions, SurfaceHit, SurroundObservation,
};

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::EgoPose;
use crate::semantic_map::{Bounds, Polygon, SemanticMap};
use crate::{Error, Result};

pub const DRIVABLE: usize = 0;
pub const WALKWAY: usize = 1;
pub const CROSSING: usize = 2;
pub const CATEGORY_NAMES: [&str; 3] = ["drivable", "walkway", "crossing"];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct WorldSpec {
    pub seed: u64,
    /// Side of the square world `[0, extent]²`, metres.
    pub extent: f64,
    /// Roads per kilometre along each axis.
    pub road_density: f64,
    pub road_width: [f64; 2],
    pub walkway_width: [f64; 2],
    pub walkway_elevation: f64,
    pub building_height: [f64; 2],
    /// Gap between walkway and building lots, metres.
    pub building_setback: [f64; 2],
    /// Probability that a lot carries a building.
    pub building_fill: f64,
    /// Probability that a junction arm has a crossing.
    pub crossing_frequency: f64,
    /// Probability that a cross-street piece between two roads is removed.
    pub road_drop_probability: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            seed: 0,
            extent: 500.0,
            road_density: 24.0,
            road_width: [7.0, 14.0],
            walkway_width: [2.0, 4.0],
            walkway_elevation: 0.15,
            building_height: [3.0, 10.0],
            building_setback: [0.0, 3.0],
            building_fill: 0.75,
            crossing_frequency: 0.5,
            road_drop_probability: 0.15,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], min: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] >= min && r[1] >= r[0]) {
        return Err(Error::InvalidWorldSpec(alloc::format!(
            "{name} must be an ordered range with values >= {min}"
        )));
    }
    Ok(())
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidWorldSpec(alloc::format!("{name} must be in [0, 1]")));
    }
    Ok(())
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent > 0.0) || !self.extent.is_finite() {
            return Err(Error::InvalidWorldSpec("extent must be positive".into()));
        }
        if !(self.road_density > 0.0) || !self.road_density.is_finite() {
            return Err(Error::InvalidWorldSpec(
                "road density must be positive (zero roads requested)".into(),
            ));
        }
        check_range("road_width", self.road_width, 1.0)?;
        check_range("walkway_width", self.walkway_width, 0.0)?;
        check_range("building_height", self.building_height, 0.0)?;
        check_range("building_setback", self.building_setback, 0.0)?;
        if !(-0.5..=3.0).contains(&self.walkway_elevation) {
            return Err(Error::InvalidWorldSpec(
                "walkway elevation must be within [-0.5, 3] m".into(),
            ));
        }
        check_probability("building_fill", self.building_fill)?;
        check_probability("crossing_frequency", self.crossing_frequency)?;
        check_probability("road_drop_probability", self.road_drop_probability)?;
        Ok(())
    }
}

/// Extruded box: polygon footprint from the ground up to `height`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Building {
    pub footprint: Polygon,
    pub height: f64,
}

/// A straight road piece that poses can be sampled on.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoadPiece {
    pub bounds: Bounds,
    /// Direction of travel along the piece, radians (0 or π/2).
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub extent: f64,
    pub map: SemanticMap,
    /// Surface height of each map category, metres.
    pub surface_heights: Vec<f64>,
    pub buildings: Vec<Building>,
    pub roads: Vec<RoadPiece>,
}

impl World {
    pub fn num_categories(&self) -> usize {
        self.map.num_categories()
    }

    /// Rigid planar transform of the whole world (`pose` maps old
    /// coordinates to new ones).
    pub fn transformed(&self, pose: &EgoPose) -> World {
        let p = *pose;
        let f = move |v: [f64; 2]| p.transform_point(v);
        World {
            extent: self.extent,
            map: self.map.transformed(f),
            surface_heights: self.surface_heights.clone(),
            buildings: self
                .buildings
                .iter()
                .map(|b| Building {
                    footprint: b.footprint.transformed(f),
                    height: b.height,
                })
                .collect(),
            roads: Vec::new(),
        }
    }

    /// Samples a pose on a road piece whose centre lies inside
    /// `[margin, extent - margin]²`, heading along the road (either way)
    /// within ±10°.
    pub fn sample_pose<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64) -> Option<EgoPose> {
        let lo = margin;
        let hi = self.extent - margin;
        let candidates: Vec<&RoadPiece> = self
            .roads
            .iter()
            .filter(|r| {
                let cx = 0.5 * (r.bounds.min[0] + r.bounds.max[0]);
                let cy = 0.5 * (r.bounds.min[1] + r.bounds.max[1]);
                cx >= lo && cx <= hi && cy >= lo && cy <= hi
            })
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let total: f64 = candidates.iter().map(|r| r.bounds.width() * r.bounds.height()).sum();
        let mut pick = rng.gen_range(0.0..total);
        let mut chosen = candidates[candidates.len() - 1];
        for r in &candidates {
            let a = r.bounds.width() * r.bounds.height();
            if pick < a {
                chosen = r;
                break;
            }
            pick -= a;
        }
        let b = chosen.bounds;
        let (along, across) = if chosen.heading == 0.0 { (0, 1) } else { (1, 0) };
        let mut p = [0.0; 2];
        p[along] = rng.gen_range(b.min[along]..=b.max[along]);
        let mid = 0.5 * (b.min[across] + b.max[across]);
        let half = 0.25 * (b.max[across] - b.min[across]);
        p[across] = rng.gen_range(mid - half..=mid + half);
        let flip = if rng.gen_bool(0.5) { core::f64::consts::PI } else { 0.0 };
        let jitter = rng.gen_range(-10.0f64..=10.0).to_radians();
        Some(EgoPose::new(p[0], p[1], chosen.heading + flip + jitter))
    }
}

fn uniform<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.gen_range(r[0]..r[1])
    } else {
        r[0]
    }
}

/// Road centrelines and widths along one axis. Always at least one road.
fn place_roads<R: Rng>(rng: &mut R, spec: &WorldSpec) -> Vec<(f64, f64)> {
    let spacing = 1000.0 / spec.road_density;
    let max_walk = spec.walkway_width[1];
    let mut roads: Vec<(f64, f64)> = Vec::new();
    let mut x = spacing * rng.gen_range(0.2..0.8);
    while x < spec.extent {
        let w = uniform(rng, spec.road_width);
        if let Some(&(px, pw)) = roads.last() {
            let min_gap = 0.5 * (pw + w) + 2.0 * max_walk + 4.0;
            if x - px < min_gap {
                x = px + min_gap;
                if x >= spec.extent {
                    break;
                }
            }
        }
        roads.push((x, w));
        x += spacing * rng.gen_range(0.65..1.35);
    }
    if roads.is_empty() {
        roads.push((spec.extent * 0.5, uniform(rng, spec.road_width)));
    }
    roads
}

/// `[lo, hi]` clipped to `[0, extent]`; `None` if empty.
fn clip(lo: f64, hi: f64, extent: f64) -> Option<(f64, f64)> {
    let lo = lo.max(0.0);
    let hi = hi.min(extent);
    if hi > lo {
        Some((lo, hi))
    } else {
        None
    }
}

/// Intervals of `[0, extent]` left between the given road intervals.
fn gaps(roads: &[(f64, f64)], extent: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start = 0.0;
    for &(lo, hi) in roads {
        if lo > start {
            out.push((start, lo));
        }
        start = start.max(hi);
    }
    if extent > start {
        out.push((start, extent));
    }
    out
}

pub fn generate_world(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let extent = spec.extent;
    let categories: Vec<String> = CATEGORY_NAMES.iter().map(|s| s.to_string()).collect();
    let mut map = SemanticMap::new(categories);
    let mut roads = Vec::new();
    let mut buildings = Vec::new();

    let vertical: Vec<(f64, f64)> = place_roads(&mut rng, spec)
        .into_iter()
        .filter_map(|(c, w)| clip(c - 0.5 * w, c + 0.5 * w, extent))
        .collect();
    let horizontal: Vec<(f64, f64)> = place_roads(&mut rng, spec)
        .into_iter()
        .filter_map(|(c, w)| clip(c - 0.5 * w, c + 0.5 * w, extent))
        .collect();
    if vertical.is_empty() || horizontal.is_empty() {
        return Err(Error::InvalidWorldSpec("world too small to hold a junction".into()));
    }

    // Columns between vertical roads; a cross-street piece per
    // (horizontal road, column), some removed. One horizontal road stays
    // complete so the world always has a junction.
    let columns: Vec<(f64, f64)> = (0..=vertical.len())
        .map(|k| {
            let lo = if k == 0 { 0.0 } else { vertical[k - 1].1 };
            let hi = if k == vertical.len() { extent } else { vertical[k].0 };
            (lo, hi)
        })
        .collect();
    let keep_full = rng.gen_range(0..horizontal.len());
    let keep: Vec<Vec<bool>> = (0..horizontal.len())
        .map(|j| {
            columns
                .iter()
                .map(|_| j == keep_full || !rng.gen_bool(spec.road_drop_probability))
                .collect()
        })
        .collect();

    let rows = gaps(&horizontal, extent);
    for &(xl, xr) in &vertical {
        for &(y0, y1) in &rows {
            map.push(DRIVABLE, Polygon::rect([xl, y0], [xr, y1]));
            roads.push(RoadPiece {
                bounds: Bounds::new([xl, y0], [xr, y1]),
                heading: core::f64::consts::FRAC_PI_2,
            });
        }
        for &(yb, yt) in &horizontal {
            map.push(DRIVABLE, Polygon::rect([xl, yb], [xr, yt]));
        }
    }
    for (j, &(yb, yt)) in horizontal.iter().enumerate() {
        for (k, &(x0, x1)) in columns.iter().enumerate() {
            if keep[j][k] && x1 > x0 {
                map.push(DRIVABLE, Polygon::rect([x0, yb], [x1, yt]));
                roads.push(RoadPiece {
                    bounds: Bounds::new([x0, yb], [x1, yt]),
                    heading: 0.0,
                });
            }
        }
    }

    // Crossings on junction arms.
    let arm_crossing = |rng: &mut ChaCha8Rng, arm_len: f64| -> Option<(f64, f64)> {
        if !rng.gen_bool(spec.crossing_frequency) {
            return None;
        }
        let gap = rng.gen_range(0.5..2.0);
        let width = rng.gen_range(3.0..5.0);
        if arm_len > gap + width + 1.0 {
            Some((gap, gap + width))
        } else {
            None
        }
    };
    for (i, &(xl, xr)) in vertical.iter().enumerate() {
        for (j, &(yb, yt)) in horizontal.iter().enumerate() {
            // Up and down arms along the vertical road.
            let up = horizontal.get(j + 1).map_or(extent, |h| h.0) - yt;
            if let Some((a, b)) = arm_crossing(&mut rng, up) {
                map.push(CROSSING, Polygon::rect([xl, yt + a], [xr, yt + b]));
            }
            let down = yb - if j > 0 { horizontal[j - 1].1 } else { 0.0 };
            if let Some((a, b)) = arm_crossing(&mut rng, down) {
                map.push(CROSSING, Polygon::rect([xl, yb - b], [xr, yb - a]));
            }
            // Left and right arms exist only where the cross-street does.
            let (left_col, right_col) = (i, i + 1);
            if keep[j][right_col] && columns[right_col].1 > xr {
                let len = columns[right_col].1 - xr;
                if let Some((a, b)) = arm_crossing(&mut rng, len) {
                    map.push(CROSSING, Polygon::rect([xr + a, yb], [xr + b, yt]));
                }
            }
            if keep[j][left_col] && columns[left_col].0 < xl {
                let len = xl - columns[left_col].0;
                if let Some((a, b)) = arm_crossing(&mut rng, len) {
                    map.push(CROSSING, Polygon::rect([xl - b, yb], [xl - a, yt]));
                }
            }
        }
    }

    // Blocks: per column, the spans between kept cross-street pieces.
    for (k, &(x0, x1)) in columns.iter().enumerate() {
        if x1 <= x0 {
            continue;
        }
        let mut spans = Vec::new();
        let mut start = 0.0;
        for (j, &(yb, yt)) in horizontal.iter().enumerate() {
            if keep[j][k] {
                if yb > start {
                    spans.push((start, yb));
                }
                start = yt;
            }
        }
        if extent > start {
            spans.push((start, extent));
        }
        for (y0, y1) in spans {
            add_block(&mut rng, spec, &mut map, &mut buildings, [x0, y0], [x1, y1]);
        }
    }

    let mut surface_heights = vec![0.0; CATEGORY_NAMES.len()];
    surface_heights[WALKWAY] = spec.walkway_elevation;
    Ok(World {
        extent,
        map,
        surface_heights,
        buildings,
        roads,
    })
}

fn add_block(
    rng: &mut ChaCha8Rng,
    spec: &WorldSpec,
    map: &mut SemanticMap,
    buildings: &mut Vec<Building>,
    min: [f64; 2],
    max: [f64; 2],
) {
    let w = max[0] - min[0];
    let h = max[1] - min[1];
    let ww = uniform(rng, spec.walkway_width);
    if ww <= 0.0 || w <= 0.0 || h <= 0.0 {
        return;
    }
    if w < 2.0 * ww + 1.0 || h < 2.0 * ww + 1.0 {
        map.push(WALKWAY, Polygon::rect(min, max));
        return;
    }
    let (x0, y0, x1, y1) = (min[0], min[1], max[0], max[1]);
    map.push(WALKWAY, Polygon::rect([x0, y0], [x1, y0 + ww]));
    map.push(WALKWAY, Polygon::rect([x0, y1 - ww], [x1, y1]));
    map.push(WALKWAY, Polygon::rect([x0, y0 + ww], [x0 + ww, y1 - ww]));
    map.push(WALKWAY, Polygon::rect([x1 - ww, y0 + ww], [x1, y1 - ww]));

    let setback = uniform(rng, spec.building_setback);
    let ix0 = x0 + ww + setback;
    let iy0 = y0 + ww + setback;
    let ix1 = x1 - ww - setback;
    let iy1 = y1 - ww - setback;
    if ix1 - ix0 < 4.0 || iy1 - iy0 < 4.0 {
        return;
    }
    let lot = rng.gen_range(10.0..20.0);
    let nx = libm::round((ix1 - ix0) / lot).max(1.0) as usize;
    let ny = libm::round((iy1 - iy0) / lot).max(1.0) as usize;
    let lx = (ix1 - ix0) / nx as f64;
    let ly = (iy1 - iy0) / ny as f64;
    for a in 0..nx {
        for b in 0..ny {
            let fill = rng.gen_bool(spec.building_fill);
            let gap = rng.gen_range(0.5..1.5f64).min(0.25 * lx.min(ly));
            let height = uniform(rng, spec.building_height);
            if !fill || height <= 0.0 {
                continue;
            }
            let fx0 = ix0 + a as f64 * lx + if a == 0 { 0.0 } else { gap };
            let fx1 = ix0 + (a + 1) as f64 * lx - if a + 1 == nx { 0.0 } else { gap };
            let fy0 = iy0 + b as f64 * ly + if b == 0 { 0.0 } else { gap };
            let fy1 = iy0 + (b + 1) as f64 * ly - if b + 1 == ny { 0.0 } else { gap };
            buildings.push(Building {
                footprint: Polygon::rect([fx0, fy0], [fx1, fy1]),
                height,
            });
        }
    }
}
