//! Analytic raycaster for surround-view semantic and height images.
//!
//! Every pixel ray is intersected exactly with the ground plane, raised or
//! sunken category surfaces (prisms over their polygons) and building
//! prisms. The label and height of the first hit are recorded; rays that hit
//! nothing within range get [`SurroundObservation::NONE`] and a NaN height.

use alloc::vec;
use alloc::vec::Vec;

use super::World;
use crate::geometry::{Camera, CameraRig, EgoPose};
use crate::linalg::Vec3;
use crate::par;
use crate::semantic_map::{Bounds, Polygon};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RenderOptions {
    /// Horizontal distance beyond which rays are treated as hitting nothing.
    pub max_range: f64,
    /// Cell size of the ray traversal grid, metres.
    pub grid_cell: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            max_range: 200.0,
            grid_cell: 8.0,
        }
    }
}

/// One camera's label and height images (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct CameraObservation {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u8>,
    /// Metres above ground; NaN where `labels == NONE`.
    pub heights: Vec<f64>,
    /// Bit `c` set where the hit surface belongs to map category `c`.
    /// Overlapping categories (a crossing on a road) share a pixel here,
    /// while `labels` keeps only the topmost one.
    pub memberships: Vec<u32>,
}

/// Per-camera observations in rig order.
///
/// Labels `0..N` are the map categories, `N` is building, `N + 1` is
/// unlabelled terrain and [`Self::NONE`] marks rays without a hit.
#[derive(Debug, Clone, PartialEq)]
pub struct SurroundObservation {
    pub num_categories: usize,
    pub cameras: Vec<CameraObservation>,
}

impl SurroundObservation {
    pub const NONE: u8 = u8::MAX;

    pub fn building_label(&self) -> u8 {
        self.num_categories as u8
    }

    pub fn terrain_label(&self) -> u8 {
        self.num_categories as u8 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Hit {
    t: f64,
    z: f64,
    label: u8,
    members: u32,
}

/// First surface met by a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub label: u8,
    pub height: f64,
    pub memberships: u32,
}

struct Prism {
    footprint: Polygon,
    bounds: Bounds,
    z0: f64,
    z1: f64,
    label: u8,
    members: u32,
}

#[inline]
fn cross2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

impl Prism {
    /// First intersection with `t > t_min`. Cap hits report the cap height
    /// exactly. `skip_top` ignores the upper cap (used when entering a pit
    /// through it).
    fn first_hit(&self, o: Vec3, d: Vec3, t_min: f64, skip_top: bool) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut consider = |t: f64, z: f64| {
            if t > t_min && best.is_none_or(|b| t < b.t) {
                best = Some(Hit {
                    t,
                    z,
                    label: self.label,
                    members: self.members,
                });
            }
        };
        if d.z() != 0.0 {
            let caps: &[f64] = if skip_top {
                &[self.z0][..]
            } else {
                &[self.z1, self.z0][..]
            };
            for &zc in caps {
                let t = (zc - o.z()) / d.z();
                if t > t_min {
                    let p = [o.x() + t * d.x(), o.y() + t * d.y()];
                    if self.footprint.contains(p) {
                        consider(t, zc);
                    }
                }
            }
        }
        let dxy = [d.x(), d.y()];
        for (a, b) in self.footprint.edges() {
            let e = [b[0] - a[0], b[1] - a[1]];
            let denom = cross2(dxy, e);
            if denom == 0.0 {
                continue;
            }
            let w = [a[0] - o.x(), a[1] - o.y()];
            let t = cross2(w, e) / denom;
            let s = cross2(w, dxy) / denom;
            if !(0.0..=1.0).contains(&s) || t <= t_min {
                continue;
            }
            let z = o.z() + t * d.z();
            if z >= self.z0 && z <= self.z1 {
                consider(t, z);
            }
        }
        best
    }
}

struct Flat {
    polygon: Polygon,
    label: u8,
    /// Index into `prisms` of the pit below a sunken surface.
    pit: Option<usize>,
}

/// World geometry prepared for ray queries.
pub struct RayScene {
    prisms: Vec<Prism>,
    flats: Vec<Flat>,
    pits: Vec<Prism>,
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    prism_bins: Vec<Vec<u32>>,
    flat_bins: Vec<Vec<u32>>,
    terrain_label: u8,
}

impl RayScene {
    pub fn new(world: &World, cell: f64) -> Self {
        let n = world.num_categories();
        let building_label = n as u8;
        let mut prisms = Vec::new();
        let mut flats = Vec::new();
        let mut pits = Vec::new();
        for (c, list) in world.map.polygons.iter().enumerate() {
            let h = world.surface_heights.get(c).copied().unwrap_or(0.0);
            for poly in list {
                if poly.is_degenerate() {
                    continue;
                }
                let bounds = poly.bounds();
                if h > 0.0 {
                    prisms.push(Prism {
                        footprint: poly.clone(),
                        bounds,
                        z0: 0.0,
                        z1: h,
                        label: c as u8,
                        members: 1 << c,
                    });
                } else {
                    let pit = if h < 0.0 {
                        pits.push(Prism {
                            footprint: poly.clone(),
                            bounds,
                            z0: h,
                            z1: 0.0,
                            label: c as u8,
                            members: 1 << c,
                        });
                        Some(pits.len() - 1)
                    } else {
                        None
                    };
                    flats.push(Flat {
                        polygon: poly.clone(),
                        label: c as u8,
                        pit,
                    });
                }
            }
        }
        for b in &world.buildings {
            if b.footprint.is_degenerate() || !(b.height > 0.0) {
                continue;
            }
            prisms.push(Prism {
                bounds: b.footprint.bounds(),
                footprint: b.footprint.clone(),
                z0: 0.0,
                z1: b.height,
                label: building_label,
                members: 0,
            });
        }

        let mut all = Bounds::empty();
        for p in &prisms {
            all.include(p.bounds.min);
            all.include(p.bounds.max);
        }
        for f in &flats {
            let b = f.polygon.bounds();
            all.include(b.min);
            all.include(b.max);
        }
        if all.is_empty() {
            all = Bounds::new([-1.0, -1.0], [1.0, 1.0]);
        }
        let cell = if cell > 0.0 { cell } else { 8.0 };
        let origin = [all.min[0] - 1.0, all.min[1] - 1.0];
        let nx = (libm::ceil((all.max[0] + 1.0 - origin[0]) / cell) as usize).max(1);
        let ny = (libm::ceil((all.max[1] + 1.0 - origin[1]) / cell) as usize).max(1);
        let mut scene = RayScene {
            prisms,
            flats,
            pits,
            origin,
            cell,
            nx,
            ny,
            prism_bins: vec![Vec::new(); nx * ny],
            flat_bins: vec![Vec::new(); nx * ny],
            terrain_label: n as u8 + 1,
        };
        for i in 0..scene.prisms.len() {
            let b = scene.prisms[i].bounds;
            for bin in scene.bins_overlapping(&b) {
                scene.prism_bins[bin].push(i as u32);
            }
        }
        for i in 0..scene.flats.len() {
            let b = scene.flats[i].polygon.bounds();
            for bin in scene.bins_overlapping(&b) {
                scene.flat_bins[bin].push(i as u32);
            }
        }
        scene
    }

    fn bin_coord(&self, v: f64, axis: usize) -> i64 {
        libm::floor((v - self.origin[axis]) / self.cell) as i64
    }

    fn bins_overlapping(&self, b: &Bounds) -> Vec<usize> {
        let x0 = self.bin_coord(b.min[0], 0).clamp(0, self.nx as i64 - 1) as usize;
        let x1 = self.bin_coord(b.max[0], 0).clamp(0, self.nx as i64 - 1) as usize;
        let y0 = self.bin_coord(b.min[1], 1).clamp(0, self.ny as i64 - 1) as usize;
        let y1 = self.bin_coord(b.max[1], 1).clamp(0, self.ny as i64 - 1) as usize;
        let mut out = Vec::with_capacity((x1 - x0 + 1) * (y1 - y0 + 1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                out.push(y * self.nx + x);
            }
        }
        out
    }

    /// First prism hit along the ray with `t < t_end`, via a 2D DDA over
    /// the traversal grid.
    fn first_prism_hit(&self, o: Vec3, d: Vec3, t_end: f64) -> Option<Hit> {
        let gx1 = self.origin[0] + self.nx as f64 * self.cell;
        let gy1 = self.origin[1] + self.ny as f64 * self.cell;
        let mut t0 = 0.0f64;
        let mut t1 = t_end;
        for (axis, (lo, hi)) in [(self.origin[0], gx1), (self.origin[1], gy1)].into_iter().enumerate() {
            let (oa, da) = (o[axis], d[axis]);
            if da == 0.0 {
                if oa < lo || oa > hi {
                    return None;
                }
            } else {
                let ta = (lo - oa) / da;
                let tb = (hi - oa) / da;
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
        }
        if !(t1 > t0) {
            return None;
        }
        let px = o.x() + t0 * d.x();
        let py = o.y() + t0 * d.y();
        let mut ix = self.bin_coord(px, 0).clamp(0, self.nx as i64 - 1);
        let mut iy = self.bin_coord(py, 1).clamp(0, self.ny as i64 - 1);
        let (step_x, mut tmax_x, tdelta_x) = dda_axis(o.x(), d.x(), self.origin[0], self.cell, ix);
        let (step_y, mut tmax_y, tdelta_y) = dda_axis(o.y(), d.y(), self.origin[1], self.cell, iy);
        let mut best: Option<Hit> = None;
        loop {
            let bin = iy as usize * self.nx + ix as usize;
            for &pi in &self.prism_bins[bin] {
                if let Some(h) = self.prisms[pi as usize].first_hit(o, d, 1e-9, false) {
                    if h.t < t_end && best.is_none_or(|b| h.t < b.t) {
                        best = Some(h);
                    }
                }
            }
            let t_next = tmax_x.min(tmax_y);
            if best.is_some_and(|b| b.t <= t_next) || t_next >= t1 {
                break;
            }
            if tmax_x < tmax_y {
                ix += step_x;
                tmax_x += tdelta_x;
            } else {
                iy += step_y;
                tmax_y += tdelta_y;
            }
            if ix < 0 || iy < 0 || ix >= self.nx as i64 || iy >= self.ny as i64 {
                break;
            }
        }
        best
    }

    fn ground_hit(&self, o: Vec3, d: Vec3, t: f64) -> Hit {
        let p = [o.x() + t * d.x(), o.y() + t * d.y()];
        let bx = self.bin_coord(p[0], 0);
        let by = self.bin_coord(p[1], 1);
        let terrain = Hit {
            t,
            z: 0.0,
            label: self.terrain_label,
            members: 0,
        };
        if bx < 0 || by < 0 || bx >= self.nx as i64 || by >= self.ny as i64 {
            return terrain;
        }
        let bin = by as usize * self.nx + bx as usize;
        let mut found: Option<&Flat> = None;
        let mut members = 0u32;
        for &fi in &self.flat_bins[bin] {
            let f = &self.flats[fi as usize];
            if f.polygon.contains(p) {
                members |= 1 << f.label;
                if found.is_none_or(|g| f.label > g.label) {
                    found = Some(f);
                }
            }
        }
        let Some(f) = found else { return terrain };
        let flat = Hit {
            t,
            z: 0.0,
            label: f.label,
            members,
        };
        match f.pit {
            Some(pi) => self.pits[pi].first_hit(o, d, t, true).unwrap_or(flat),
            None => flat,
        }
    }

    /// Label and height of the first surface along `o + t·d`, or `None`
    /// if nothing is hit within `max_range` horizontal metres.
    pub fn trace(&self, o: Vec3, d: Vec3, max_range: f64) -> Option<SurfaceHit> {
        let dxy = libm::hypot(d.x(), d.y());
        let t_range = if dxy > 0.0 { max_range / dxy } else { f64::INFINITY };
        let t_ground = if d.z() < 0.0 && o.z() > 0.0 {
            -o.z() / d.z()
        } else {
            f64::INFINITY
        };
        let t_end = t_range.min(t_ground);
        let hit = match self.first_prism_hit(o, d, t_end) {
            Some(h) => h,
            None if t_ground <= t_range => self.ground_hit(o, d, t_ground),
            None => return None,
        };
        Some(SurfaceHit {
            label: hit.label,
            height: hit.z,
            memberships: hit.members,
        })
    }
}

fn dda_axis(o: f64, d: f64, origin: f64, cell: f64, idx: i64) -> (i64, f64, f64) {
    if d > 0.0 {
        let boundary = origin + (idx + 1) as f64 * cell;
        (1, (boundary - o) / d, cell / d)
    } else if d < 0.0 {
        let boundary = origin + idx as f64 * cell;
        (-1, (boundary - o) / d, -cell / d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

/// Renders one camera of a rig mounted on `pose`.
pub fn render_camera(scene: &RayScene, camera: &Camera, pose: &EgoPose, opts: &RenderOptions) -> CameraObservation {
    let w = camera.intrinsics.width();
    let h = camera.intrinsics.height();
    let c = camera.center();
    let oxy = pose.transform_point([c.x(), c.y()]);
    let origin = Vec3::new(oxy[0], oxy[1], c.z());
    let rot = pose.rotation();
    let none = SurfaceHit {
        label: SurroundObservation::NONE,
        height: f64::NAN,
        memberships: 0,
    };
    let rows: Vec<Vec<SurfaceHit>> = par::map_range(h, |row| {
        (0..w)
            .map(|col| {
                let d = rot * camera.ray_direction([col as f64, row as f64]);
                scene.trace(origin, d, opts.max_range).unwrap_or(none)
            })
            .collect()
    });
    let mut obs = CameraObservation {
        width: w,
        height: h,
        labels: Vec::with_capacity(w * h),
        heights: Vec::with_capacity(w * h),
        memberships: Vec::with_capacity(w * h),
    };
    for hit in rows.into_iter().flatten() {
        obs.labels.push(hit.label);
        obs.heights.push(hit.height);
        obs.memberships.push(hit.memberships);
    }
    obs
}

/// Renders every camera of `rig` with the ego vehicle at `pose`.
pub fn render_surround(world: &World, rig: &CameraRig, pose: &EgoPose, opts: &RenderOptions) -> SurroundObservation {
    let scene = RayScene::new(world, opts.grid_cell);
    SurroundObservation {
        num_categories: world.num_categories(),
        cameras: rig
            .cameras
            .iter()
            .map(|cam| render_camera(&scene, cam, pose, opts))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraExtrinsics, CameraIntrinsics};
    use crate::semantic_map::SemanticMap;
    use crate::synthworld::{Building, CATEGORY_NAMES};
    use alloc::string::ToString;

    impl RayScene {
        fn trace2(&self, o: Vec3, d: Vec3, range: f64) -> Option<(u8, f64)> {
            self.trace(o, d, range).map(|h| (h.label, h.height))
        }
    }

    fn empty_world() -> World {
        World {
            extent: 100.0,
            map: SemanticMap::new(CATEGORY_NAMES.iter().map(|s| s.to_string()).collect()),
            surface_heights: vec![0.0, 0.15, 0.0],
            buildings: Vec::new(),
            roads: Vec::new(),
        }
    }

    fn level_camera() -> Camera {
        let intr = CameraIntrinsics::new(100.0, 100.0, [50.0, 50.0], [101, 101]).unwrap();
        let extr = CameraExtrinsics::from_mount(Vec3::new(0.0, 0.0, 1.5), 0.0, 0.0);
        Camera::new("front", intr, extr).unwrap()
    }

    #[test]
    fn flat_drivable_world_has_zero_heights() {
        let mut world = empty_world();
        world.map.polygons[0].push(Polygon::rect([-300.0, -300.0], [300.0, 300.0]));
        let rig = CameraRig::new(vec![level_camera()]).unwrap();
        let obs = render_surround(&world, &rig, &EgoPose::IDENTITY, &RenderOptions::default());
        let cam = &obs.cameras[0];
        let mut ground = 0;
        for (l, h) in cam.labels.iter().zip(&cam.heights) {
            if *l == 0 {
                assert_eq!(*h, 0.0);
                ground += 1;
            } else {
                assert_eq!(*l, SurroundObservation::NONE);
                assert!(h.is_nan());
            }
        }
        assert!(ground > 0);
    }

    #[test]
    fn empty_world_sky_is_none() {
        let world = empty_world();
        let rig = CameraRig::new(vec![level_camera()]).unwrap();
        let obs = render_surround(&world, &rig, &EgoPose::IDENTITY, &RenderOptions::default());
        let cam = &obs.cameras[0];
        for row in 0..50 {
            for col in 0..101 {
                assert_eq!(cam.labels[row * 101 + col], SurroundObservation::NONE);
                assert!(cam.heights[row * 101 + col].is_nan());
            }
        }
        // Below the horizon the (unlabelled) ground plane is hit.
        assert_eq!(cam.labels[100 * 101 + 50], obs.terrain_label());
    }

    #[test]
    fn raised_surface_reports_its_elevation() {
        let mut world = empty_world();
        world.map.polygons[1].push(Polygon::rect([4.0, -5.0], [30.0, 5.0]));
        let scene = RayScene::new(&world, 8.0);
        let o = Vec3::new(0.0, 0.0, 1.5);
        let (label, z) = scene.trace2(o, Vec3::new(10.0, 0.0, -1.35), 200.0).unwrap();
        assert_eq!((label, z), (1, 0.15));
        // Curb face.
        let (label, z) = scene.trace2(o, Vec3::new(4.0, 0.0, -1.45), 200.0).unwrap();
        assert_eq!(label, 1);
        assert!((z - 0.05).abs() < 1e-12);
    }

    #[test]
    fn sunken_surface_is_a_pit() {
        let mut world = empty_world();
        world.surface_heights[1] = -0.5;
        world.map.polygons[1].push(Polygon::rect([5.0, -5.0], [30.0, 5.0]));
        let scene = RayScene::new(&world, 8.0);
        let o = Vec3::new(0.0, 0.0, 1.5);
        let (label, z) = scene.trace2(o, Vec3::new(10.0, 0.0, -2.0), 200.0).unwrap();
        assert_eq!((label, z), (1, -0.5));
        // Ray enters near the rim and meets the far wall of a narrow pit.
        let mut world = empty_world();
        world.surface_heights[1] = -0.5;
        world.map.polygons[1].push(Polygon::rect([10.0, -5.0], [10.2, 5.0]));
        let scene = RayScene::new(&world, 8.0);
        let (label, z) = scene.trace2(o, Vec3::new(10.1, 0.0, -1.5), 200.0).unwrap();
        assert_eq!(label, 1);
        assert!(z < 0.0 && z > -0.5);
    }

    #[test]
    fn building_occludes_ground() {
        let mut world = empty_world();
        world.buildings.push(Building {
            footprint: Polygon::rect([10.0, -5.0], [12.0, 5.0]),
            height: 3.0,
        });
        let scene = RayScene::new(&world, 8.0);
        let o = Vec3::new(0.0, 0.0, 1.5);
        let (label, z) = scene.trace2(o, Vec3::new(20.0, 0.0, -1.5), 200.0).unwrap();
        assert_eq!(label, 3);
        assert!((z - (1.5 - 1.5 * 10.0 / 20.0)).abs() < 1e-12);
        // Over the roof.
        let (label, _) = scene.trace2(o, Vec3::new(10.0, 0.0, 2.0), 200.0).unwrap_or((255, 0.0));
        assert_eq!(label, 255);
        // Roof from above.
        let high = Vec3::new(0.0, 0.0, 20.0);
        let (label, z) = scene.trace2(high, Vec3::new(11.0, 0.0, -17.0), 200.0).unwrap();
        assert_eq!((label, z), (3, 3.0));
    }

    #[test]
    fn overlapping_categories_share_membership() {
        let mut world = empty_world();
        world.map.polygons[0].push(Polygon::rect([0.0, -5.0], [30.0, 5.0]));
        world.map.polygons[2].push(Polygon::rect([8.0, -5.0], [12.0, 5.0]));
        let scene = RayScene::new(&world, 8.0);
        let hit = scene
            .trace(Vec3::new(0.0, 0.0, 1.5), Vec3::new(10.0, 0.0, -1.5), 200.0)
            .unwrap();
        assert_eq!((hit.label, hit.memberships), (2, 0b101));
        let hit = scene
            .trace(Vec3::new(0.0, 0.0, 1.5), Vec3::new(20.0, 0.0, -1.5), 200.0)
            .unwrap();
        assert_eq!((hit.label, hit.memberships), (0, 0b001));
    }

    #[test]
    fn range_limit_returns_none() {
        let world = empty_world();
        let scene = RayScene::new(&world, 8.0);
        assert!(scene
            .trace2(Vec3::new(0.0, 0.0, 1.5), Vec3::new(1000.0, 0.0, -1.0), 200.0)
            .is_none());
    }
}
