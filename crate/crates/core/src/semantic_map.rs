//! Polygon SD maps and their N-channel boolean rasterization.
//!
//! Rasters live on a global lattice: cell `(col, row)` of a raster whose
//! lattice origin is `(col0, row0)` has its centre at
//! `((col0 + col + ½)·res, (row0 + row + ½)·res)` in the map frame, with
//! `row` increasing along +y. Two rasters with the same resolution therefore
//! agree cell-for-cell wherever they overlap, and cropping a tile is exactly a
//! sub-window of the full-map raster.
//!
//! A cell is set iff its centre lies inside (even-odd rule) or on the
//! boundary of any polygon of the channel's category.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::EgoPose;
use crate::par;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Self {
        Polygon { vertices }
    }

    /// Axis-aligned rectangle, counter-clockwise.
    pub fn rect(min: [f64; 2], max: [f64; 2]) -> Self {
        Polygon {
            vertices: vec![min, [max[0], min[1]], max, [min[0], max[1]]],
        }
    }

    /// Signed shoelace area (positive for counter-clockwise).
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * acc
    }

    pub fn area(&self) -> f64 {
        libm::fabs(self.signed_area())
    }

    /// At least three finite vertices and nonzero area.
    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3 || self.vertices.iter().flatten().any(|v| !v.is_finite()) || self.signed_area() == 0.0
    }

    pub fn bounds(&self) -> Bounds {
        let mut b = Bounds::empty();
        for v in &self.vertices {
            b.include(*v);
        }
        b
    }

    pub fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd containment; points on an edge count as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if x == p[0] {
                    return true;
                }
                if p[0] < x {
                    inside = !inside;
                }
            } else if on_flat_or_endpoint(a, b, p) {
                return true;
            }
        }
        inside
    }

    pub fn transformed(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|v| f(*v)).collect(),
        }
    }
}

/// Boundary cases not covered by the crossing computation: horizontal edges
/// at the query height and edge endpoints at the query height.
fn on_flat_or_endpoint(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    if a[1] == p[1] && b[1] == p[1] {
        let (lo, hi) = if a[0] <= b[0] { (a[0], b[0]) } else { (b[0], a[0]) };
        return p[0] >= lo && p[0] <= hi;
    }
    (a[1] == p[1] && a[0] == p[0]) || (b[1] == p[1] && b[0] == p[0])
}

/// Axis-aligned rectangle in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Bounds { min, max }
    }

    pub fn empty() -> Self {
        Bounds {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
        }
    }

    pub fn include(&mut self, p: [f64; 2]) {
        for i in 0..2 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.max[0] > self.min[0] && self.max[1] > self.min[1])
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }
}

/// Polygon world model. Category order is the channel order everywhere.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemanticMap {
    pub categories: Vec<String>,
    /// `polygons[c]` are the polygons of `categories[c]`.
    pub polygons: Vec<Vec<Polygon>>,
}

impl SemanticMap {
    pub fn new(categories: Vec<String>) -> Self {
        let n = categories.len();
        SemanticMap {
            categories,
            polygons: vec![Vec::new(); n],
        }
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }

    pub fn push(&mut self, category: usize, polygon: Polygon) {
        self.polygons[category].push(polygon);
    }

    pub fn validate(&self) -> Result<()> {
        if self.polygons.len() != self.categories.len() {
            return Err(Error::InvalidPolygon(alloc::format!(
                "{} polygon lists for {} categories",
                self.polygons.len(),
                self.categories.len()
            )));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Bounds {
        let mut b = Bounds::empty();
        for poly in self.polygons.iter().flatten() {
            for v in &poly.vertices {
                b.include(*v);
            }
        }
        b
    }

    /// Applies `f` to every vertex (e.g. a change of frame).
    pub fn transformed(&self, f: impl Fn([f64; 2]) -> [f64; 2] + Copy) -> SemanticMap {
        SemanticMap {
            categories: self.categories.clone(),
            polygons: self
                .polygons
                .iter()
                .map(|list| list.iter().map(|p| p.transformed(f)).collect())
                .collect(),
        }
    }

    /// The map expressed in the ego frame of `pose`.
    pub fn in_ego_frame(&self, pose: &EgoPose) -> SemanticMap {
        let pose = *pose;
        self.transformed(move |p| pose.inverse_transform_point(p))
    }

    /// Map containing only category `c` (kept at its channel position).
    pub fn only_category(&self, c: usize) -> SemanticMap {
        let mut out = SemanticMap::new(self.categories.clone());
        out.polygons[c] = self.polygons[c].clone();
        out
    }
}

/// Window of the global raster lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeWindow {
    pub col0: i64,
    pub row0: i64,
    pub width: usize,
    pub height: usize,
}

/// N boolean planes sharing one georeferenced grid.
///
/// Georeferencing is kept in `f32` so that the on-disk header is exact.
/// `data` is channel-major, row-major within a channel, one byte (0/1) per
/// cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MapRaster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub resolution: f32,
    /// Map-frame centre of cell `(0, 0)`.
    pub origin: [f32; 2],
    pub data: Vec<u8>,
    /// Polygons skipped because they were degenerate (not persisted).
    pub degenerate_skipped: usize,
}

impl MapRaster {
    pub fn zeros(width: usize, height: usize, channels: usize, resolution: f32, origin: [f32; 2]) -> Self {
        MapRaster {
            width,
            height,
            channels,
            resolution,
            origin,
            data: vec![0; width * height * channels],
            degenerate_skipped: 0,
        }
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn channel(&self, c: usize) -> &[u8] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [u8] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> bool {
        self.data[(c * self.height + row) * self.width + col] != 0
    }

    #[inline]
    pub fn set(&mut self, c: usize, row: usize, col: usize, v: bool) {
        let w = self.width;
        let h = self.height;
        self.data[(c * h + row) * w + col] = v as u8;
    }

    /// Map-frame centre of a cell, from the stored georeference.
    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        let res = f64::from(self.resolution);
        [
            f64::from(self.origin[0]) + col as f64 * res,
            f64::from(self.origin[1]) + row as f64 * res,
        ]
    }

    pub fn count_set(&self, c: usize) -> usize {
        self.channel(c).iter().filter(|&&v| v != 0).count()
    }
}

/// A raster of side `L` cells cropped around a pose prior.
#[derive(Debug, Clone, PartialEq)]
pub struct MapTile {
    pub raster: MapRaster,
    pub prior: EgoPose,
    pub window: LatticeWindow,
}

impl MapTile {
    pub fn side_cells(&self) -> usize {
        self.raster.width
    }

    pub fn side_meters(&self) -> f64 {
        self.raster.width as f64 * f64::from(self.raster.resolution)
    }

    /// Map-frame centre of the tile.
    pub fn center(&self) -> [f64; 2] {
        let res = f64::from(self.raster.resolution);
        let w = &self.window;
        [
            (w.col0 as f64 + w.width as f64 * 0.5) * res,
            (w.row0 as f64 + w.height as f64 * 0.5) * res,
        ]
    }
}

fn validate_resolution(resolution: f64) -> Result<f32> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(Error::InvalidRaster("resolution must be positive".into()));
    }
    let r = resolution as f32;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidRaster("resolution not representable".into()));
    }
    Ok(r)
}

/// Rasterizes `map` over the lattice cells whose extent covers `bounds`.
pub fn rasterize(map: &SemanticMap, bounds: Bounds, resolution: f64) -> Result<MapRaster> {
    let res32 = validate_resolution(resolution)?;
    if bounds.is_empty() || !bounds.min.iter().chain(&bounds.max).all(|v| v.is_finite()) {
        return Err(Error::InvalidRaster(
            "bounds must be a nonempty finite rectangle".into(),
        ));
    }
    map.validate()?;
    let res = f64::from(res32);
    let col0 = libm::floor(bounds.min[0] / res) as i64;
    let row0 = libm::floor(bounds.min[1] / res) as i64;
    let col1 = libm::ceil(bounds.max[0] / res) as i64;
    let row1 = libm::ceil(bounds.max[1] / res) as i64;
    let window = LatticeWindow {
        col0,
        row0,
        width: (col1 - col0).max(1) as usize,
        height: (row1 - row0).max(1) as usize,
    };
    Ok(rasterize_window(map, window, res32))
}

/// Rasterizes `map` into an explicit lattice window.
pub fn rasterize_window(map: &SemanticMap, window: LatticeWindow, resolution: f32) -> MapRaster {
    let res = f64::from(resolution);
    let origin = [
        ((window.col0 as f64 + 0.5) * res) as f32,
        ((window.row0 as f64 + 0.5) * res) as f32,
    ];
    let mut raster = MapRaster::zeros(window.width, window.height, map.num_categories(), resolution, origin);
    let mut skipped = 0;
    let mut prepared: Vec<Vec<PreparedPolygon<'_>>> = Vec::with_capacity(map.num_categories());
    for list in &map.polygons {
        let mut v = Vec::with_capacity(list.len());
        for poly in list {
            if poly.is_degenerate() {
                skipped += 1;
                continue;
            }
            v.push(PreparedPolygon {
                poly,
                bounds: poly.bounds(),
            });
        }
        prepared.push(v);
    }
    if skipped > 0 {
        log::warn!("rasterize: skipped {skipped} degenerate polygon(s)");
    }
    raster.degenerate_skipped = skipped;

    let width = window.width;
    let plane = window.width * window.height;
    if width == 0 || plane == 0 {
        return raster;
    }
    for (c, polys) in prepared.iter().enumerate() {
        if polys.is_empty() {
            continue;
        }
        let channel = &mut raster.data[c * plane..(c + 1) * plane];
        par::for_each_chunk(channel, width, |row, cells| {
            let py = (window.row0 as f64 + row as f64 + 0.5) * res;
            let mut xs = Vec::new();
            for p in polys {
                if py < p.bounds.min[1] || py > p.bounds.max[1] {
                    continue;
                }
                fill_row(p.poly, py, window.col0, res, cells, &mut xs);
            }
        });
    }
    raster
}

struct PreparedPolygon<'a> {
    poly: &'a Polygon,
    bounds: Bounds,
}

#[inline]
fn cell_x(col0: i64, col: usize, res: f64) -> f64 {
    (col0 as f64 + col as f64 + 0.5) * res
}

/// First column whose centre is `>= x` (may be `width`).
fn first_col_at_or_after(x: f64, col0: i64, res: f64, width: usize) -> usize {
    let guess = libm::floor(x / res - 0.5) as i64 - col0;
    let mut c = guess.clamp(0, width as i64) as usize;
    while c > 0 && cell_x(col0, c - 1, res) >= x {
        c -= 1;
    }
    while c < width && cell_x(col0, c, res) < x {
        c += 1;
    }
    c
}

/// Sets the cells of one row covered by `poly` at height `py`.
fn fill_row(poly: &Polygon, py: f64, col0: i64, res: f64, cells: &mut [u8], xs: &mut Vec<f64>) {
    let width = cells.len();
    xs.clear();
    for (a, b) in poly.edges() {
        if (a[1] > py) != (b[1] > py) {
            xs.push(a[0] + (py - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
        }
    }
    xs.sort_unstable_by(|a, b| a.total_cmp(b));
    // Interior: an odd number of crossings strictly right of the centre,
    // i.e. centre in [xs[2k], xs[2k+1]).
    for pair in xs.chunks_exact(2) {
        let start = first_col_at_or_after(pair[0], col0, res, width);
        let end = first_col_at_or_after(pair[1], col0, res, width);
        for cell in &mut cells[start..end] {
            *cell = 1;
        }
    }
    // Boundary: centres exactly on an edge.
    for &x in xs.iter() {
        let c = first_col_at_or_after(x, col0, res, width);
        if c < width && cell_x(col0, c, res) == x {
            cells[c] = 1;
        }
    }
    for (a, b) in poly.edges() {
        if a[1] == py && b[1] == py {
            let (lo, hi) = if a[0] <= b[0] { (a[0], b[0]) } else { (b[0], a[0]) };
            let start = first_col_at_or_after(lo, col0, res, width);
            let end = first_col_at_or_after(hi, col0, res, width);
            for cell in &mut cells[start..end] {
                *cell = 1;
            }
            if end < width && cell_x(col0, end, res) == hi {
                cells[end] = 1;
            }
        } else if a[1] == py {
            let c = first_col_at_or_after(a[0], col0, res, width);
            if c < width && cell_x(col0, c, res) == a[0] {
                cells[c] = 1;
            }
        }
    }
}

/// Side length in cells of a tile of `side` metres at `resolution`.
pub fn tile_cells(side: f64, resolution: f64) -> usize {
    libm::round(side / resolution) as usize
}

/// Crops an axis-aligned `side`-metre tile centred (to within half a cell)
/// on the prior position. Regions outside the map are zero.
pub fn crop_tile(map: &SemanticMap, prior: &EgoPose, side: f64, resolution: f64) -> Result<MapTile> {
    if !(side > 0.0) || !side.is_finite() {
        return Err(Error::InvalidRaster("tile side must be positive".into()));
    }
    let res32 = validate_resolution(resolution)?;
    map.validate()?;
    let res = f64::from(res32);
    let l = tile_cells(side, resolution).max(1);
    let half = l as f64 * 0.5;
    let window = LatticeWindow {
        col0: libm::round(prior.x / res - half) as i64,
        row0: libm::round(prior.y / res - half) as i64,
        width: l,
        height: l,
    };
    Ok(MapTile {
        raster: rasterize_window(map, window, res32),
        prior: *prior,
        window,
    })
}
