//! On-disk formats: `.smr` rasters, f32 plane files, JSON documents for
//! maps, worlds and rigs, observation dumps and 16-bit PGM previews.
//!
//! Binary layout shared by `.smr` and the f32 plane files: 4-byte magic,
//! then little-endian `u32 width, u32 height, u32 planes, f32 resolution,
//! f32 origin_x, f32 origin_y`, then the planes, plane-major and row-major
//! within a plane (one byte per cell for `.smr`, one f32 for plane files).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use heightbev_core::bev::BevGrid;
use heightbev_core::geometry::{Camera, CameraExtrinsics, CameraIntrinsics, CameraRig, EgoPose};
use heightbev_core::linalg::{Mat3, Vec3};
use heightbev_core::semantic_map::{MapRaster, Polygon, SemanticMap};
use heightbev_core::synthworld::{Building, CameraObservation, RoadPiece, SurroundObservation, World};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SMR_MAGIC: &[u8; 4] = b"SMR1";
pub const PLANE_MAGIC: &[u8; 4] = b"SMF1";
const HEADER_LEN: usize = 4 + 6 * 4;
/// Quiet NaN written for "no surface" heights.
pub const NAN_BITS: u32 = 0x7FC0_0000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub width: u32,
    pub height: u32,
    pub planes: u32,
    pub resolution: f32,
    pub origin: [f32; 2],
}

impl Header {
    fn cells(&self) -> Option<usize> {
        (self.width as usize)
            .checked_mul(self.height as usize)?
            .checked_mul(self.planes as usize)
    }
}

fn encode_header(magic: &[u8; 4], h: &Header) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(magic);
    out.extend_from_slice(&h.width.to_le_bytes());
    out.extend_from_slice(&h.height.to_le_bytes());
    out.extend_from_slice(&h.planes.to_le_bytes());
    out.extend_from_slice(&h.resolution.to_le_bytes());
    out.extend_from_slice(&h.origin[0].to_le_bytes());
    out.extend_from_slice(&h.origin[1].to_le_bytes());
    out
}

fn decode_header<'a>(bytes: &'a [u8], magic: &[u8; 4], path: &Path) -> Result<(Header, &'a [u8])> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(CliError::MagicMismatch {
            path: path.to_path_buf(),
            expected: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(CliError::MalformedHeader {
            path: path.to_path_buf(),
            reason: "header shorter than 28 bytes".into(),
        });
    }
    let u = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let f = |i: usize| f32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let h = Header {
        width: u(4),
        height: u(8),
        planes: u(12),
        resolution: f(16),
        origin: [f(20), f(24)],
    };
    if !(h.resolution > 0.0 && h.resolution.is_finite()) || !h.origin.iter().all(|v| v.is_finite()) {
        return Err(CliError::MalformedHeader {
            path: path.to_path_buf(),
            reason: "resolution must be positive and georeference finite".into(),
        });
    }
    Ok((h, &bytes[HEADER_LEN..]))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Writes `bytes` to `path`, refusing to replace an existing file unless
/// `force` is set.
pub fn write_new(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(CliError::OutputExists(path.to_path_buf()));
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn encode_raster(r: &MapRaster) -> Vec<u8> {
    let h = Header {
        width: r.width as u32,
        height: r.height as u32,
        planes: r.channels as u32,
        resolution: r.resolution,
        origin: r.origin,
    };
    let mut out = encode_header(SMR_MAGIC, &h);
    out.extend_from_slice(&r.data);
    out
}

pub fn decode_raster(bytes: &[u8], path: &Path) -> Result<MapRaster> {
    let (h, payload) = decode_header(bytes, SMR_MAGIC, path)?;
    let cells = h.cells().ok_or_else(|| CliError::MalformedHeader {
        path: path.to_path_buf(),
        reason: "dimensions overflow".into(),
    })?;
    if payload.len() < cells {
        return Err(CliError::Truncated {
            path: path.to_path_buf(),
            expected: cells,
            found: payload.len(),
        });
    }
    if payload.len() > cells {
        return Err(CliError::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("{} trailing bytes after payload", payload.len() - cells),
        });
    }
    let mut r = MapRaster::zeros(
        h.width as usize,
        h.height as usize,
        h.planes as usize,
        h.resolution,
        h.origin,
    );
    r.data.copy_from_slice(payload);
    Ok(r)
}

pub fn save_raster(r: &MapRaster, path: &Path, force: bool) -> Result<()> {
    write_new(path, &encode_raster(r), force)
}

pub fn load_raster(path: &Path) -> Result<MapRaster> {
    decode_raster(&read(path)?, path)
}

/// f32 planes with the shared header.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFile {
    pub header: Header,
    pub data: Vec<f32>,
}

pub fn encode_planes(p: &PlaneFile) -> Vec<u8> {
    let mut out = encode_header(PLANE_MAGIC, &p.header);
    out.reserve(p.data.len() * 4);
    for &v in &p.data {
        let bits = if v.is_nan() { NAN_BITS } else { v.to_bits() };
        out.extend_from_slice(&bits.to_le_bytes());
    }
    out
}

pub fn decode_planes(bytes: &[u8], path: &Path) -> Result<PlaneFile> {
    let (header, payload) = decode_header(bytes, PLANE_MAGIC, path)?;
    let cells = header.cells().ok_or_else(|| CliError::MalformedHeader {
        path: path.to_path_buf(),
        reason: "dimensions overflow".into(),
    })?;
    if payload.len() < cells * 4 {
        return Err(CliError::Truncated {
            path: path.to_path_buf(),
            expected: cells * 4,
            found: payload.len(),
        });
    }
    let data = payload[..cells * 4]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(PlaneFile { header, data })
}

// --- BEV grids ------------------------------------------------------------

fn bev_header(b: &BevGrid) -> Header {
    let half = b.size as f64 * 0.5;
    let o = ((0.5 - half) * b.resolution) as f32;
    Header {
        width: b.size as u32,
        height: b.size as u32,
        planes: b.channels as u32 + 1,
        resolution: b.resolution as f32,
        origin: [o, o],
    }
}

/// `.smr` with `round(255·score)` per channel plus a final mask plane.
pub fn encode_bev_smr(b: &BevGrid) -> Vec<u8> {
    let mut out = encode_header(SMR_MAGIC, &bev_header(b));
    out.extend(b.scores.iter().map(|&s| (s.clamp(0.0, 1.0) * 255.0).round() as u8));
    out.extend(b.mask.iter().map(|&m| u8::from(m)));
    out
}

/// Lossless f32 variant: score planes plus a final 0/1 mask plane.
pub fn encode_bev_f32(b: &BevGrid) -> Vec<u8> {
    let data = b
        .scores
        .iter()
        .map(|&s| s as f32)
        .chain(b.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }))
        .collect();
    encode_planes(&PlaneFile {
        header: bev_header(b),
        data,
    })
}

fn bev_from_planes(
    h: &Header,
    score: impl Fn(usize) -> f64,
    mask: impl Fn(usize) -> bool,
    path: &Path,
) -> Result<BevGrid> {
    if h.width != h.height || h.planes < 2 {
        return Err(CliError::Dimension(format!(
            "{}: a BEV file needs a square grid with at least one channel plus the mask",
            path.display()
        )));
    }
    let s = h.width as usize;
    let channels = h.planes as usize - 1;
    let plane = s * s;
    Ok(BevGrid {
        size: s,
        channels,
        resolution: f64::from(h.resolution),
        scores: (0..plane * channels).map(score).collect(),
        mask: (0..plane).map(|i| mask(channels * plane + i)).collect(),
    })
}

/// Loads either BEV encoding, chosen by magic.
pub fn load_bev(path: &Path) -> Result<BevGrid> {
    let bytes = read(path)?;
    if bytes.starts_with(PLANE_MAGIC) {
        let p = decode_planes(&bytes, path)?;
        bev_from_planes(&p.header, |i| f64::from(p.data[i]), |i| p.data[i] != 0.0, path)
    } else {
        let r = decode_raster(&bytes, path)?;
        let h = Header {
            width: r.width as u32,
            height: r.height as u32,
            planes: r.channels as u32,
            resolution: r.resolution,
            origin: r.origin,
        };
        bev_from_planes(&h, |i| f64::from(r.data[i]) / 255.0, |i| r.data[i] != 0, path)
    }
}

// --- PGM --------------------------------------------------------------------

/// 16-bit binary PGM of `values` (row-major), scaled so the maximum maps
/// to 65535. Rows are written top to bottom in index order.
pub fn encode_pgm16(values: &[f64], width: usize, height: usize) -> Vec<u8> {
    let max = values
        .iter()
        .fold(0.0f64, |m, &v| if v.is_finite() { m.max(v) } else { m });
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(values.len() * 2);
    for &v in values {
        let q = if max > 0.0 && v.is_finite() {
            ((v.max(0.0) / max) * 65535.0).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

// --- JSON documents ---------------------------------------------------------

type PolygonSet = BTreeMap<String, Vec<Vec<[f64; 2]>>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDoc {
    pub categories: Vec<String>,
    pub polygons: PolygonSet,
}

impl MapDoc {
    pub fn from_map(map: &SemanticMap) -> Self {
        let polygons = map
            .categories
            .iter()
            .zip(&map.polygons)
            .map(|(name, list)| (name.clone(), list.iter().map(|p| p.vertices.clone()).collect()))
            .collect();
        MapDoc {
            categories: map.categories.clone(),
            polygons,
        }
    }

    pub fn into_map(self) -> Result<SemanticMap> {
        let mut map = SemanticMap::new(self.categories);
        for (name, list) in self.polygons {
            let c = map
                .category_index(&name)
                .ok_or_else(|| CliError::Parse(format!("polygons given for unknown category `{name}`")))?;
            for vertices in list {
                map.push(c, Polygon::new(vertices));
            }
        }
        map.validate().map_err(CliError::from)?;
        Ok(map)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingDoc {
    pub footprint: Vec<[f64; 2]>,
    pub height: f64,
}

/// A map document plus 3D structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldDoc {
    pub extent: f64,
    pub categories: Vec<String>,
    pub polygons: PolygonSet,
    pub surface_heights: BTreeMap<String, f64>,
    pub buildings: Vec<BuildingDoc>,
    #[serde(default)]
    pub roads: Vec<RoadPiece>,
}

impl WorldDoc {
    pub fn from_world(w: &World) -> Self {
        let map = MapDoc::from_map(&w.map);
        WorldDoc {
            extent: w.extent,
            categories: map.categories,
            polygons: map.polygons,
            surface_heights: w
                .map
                .categories
                .iter()
                .cloned()
                .zip(w.surface_heights.iter().copied())
                .collect(),
            buildings: w
                .buildings
                .iter()
                .map(|b| BuildingDoc {
                    footprint: b.footprint.vertices.clone(),
                    height: b.height,
                })
                .collect(),
            roads: w.roads.clone(),
        }
    }

    pub fn into_world(self) -> Result<World> {
        let map = MapDoc {
            categories: self.categories,
            polygons: self.polygons,
        }
        .into_map()?;
        let mut surface_heights = vec![0.0; map.num_categories()];
        for (name, h) in self.surface_heights {
            let c = map
                .category_index(&name)
                .ok_or_else(|| CliError::Parse(format!("surface height for unknown category `{name}`")))?;
            if !h.is_finite() {
                return Err(CliError::Parse(format!("surface height of `{name}` is not finite")));
            }
            surface_heights[c] = h;
        }
        Ok(World {
            extent: self.extent,
            map,
            surface_heights,
            buildings: self
                .buildings
                .into_iter()
                .map(|b| Building {
                    footprint: Polygon::new(b.footprint),
                    height: b.height,
                })
                .collect(),
            roads: self.roads,
        })
    }
}

/// Accepts either a world document or a plain map document.
pub fn load_map_or_world(path: &Path) -> Result<SemanticMap> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
    if value.get("surface_heights").is_some() {
        let doc: WorldDoc = serde_json::from_value(value).map_err(|e| CliError::parse(path, e))?;
        Ok(doc.into_world()?.map)
    } else {
        let doc: MapDoc = serde_json::from_value(value).map_err(|e| CliError::parse(path, e))?;
        doc.into_map()
    }
}

pub fn load_world(path: &Path) -> Result<World> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: WorldDoc = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
    doc.into_world()
}

pub fn world_json(w: &World) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(&WorldDoc::from_world(w)).expect("world serializes");
    s.push(b'\n');
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDoc {
    pub name: String,
    /// Row-major 3×3 intrinsic matrix.
    pub k: [[f64; 3]; 3],
    /// Row-major 3×3 ego→camera rotation.
    pub r: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigDoc {
    pub cameras: Vec<CameraDoc>,
}

impl RigDoc {
    pub fn from_rig(rig: &CameraRig) -> Self {
        RigDoc {
            cameras: rig
                .cameras
                .iter()
                .map(|c| CameraDoc {
                    name: c.name.clone(),
                    k: c.intrinsics.matrix().0,
                    r: c.extrinsics.rotation.0,
                    translation: c.extrinsics.translation.0,
                    width: c.intrinsics.width(),
                    height: c.intrinsics.height(),
                })
                .collect(),
        }
    }

    pub fn into_rig(self) -> Result<CameraRig> {
        let cams = self
            .cameras
            .into_iter()
            .map(|c| {
                let intr = CameraIntrinsics::from_matrix(Mat3(c.k), c.width, c.height)?;
                let extr = CameraExtrinsics::new(Mat3(c.r), Vec3(c.translation))?;
                Camera::new(c.name, intr, extr)
            })
            .collect::<heightbev_core::Result<Vec<_>>>()?;
        Ok(CameraRig::new(cams)?)
    }
}

pub fn load_rig(path: &Path) -> Result<CameraRig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: RigDoc = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
    doc.into_rig()
}

pub fn rig_json(rig: &CameraRig) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(&RigDoc::from_rig(rig)).expect("rig serializes");
    s.push(b'\n');
    s
}

// --- Observation dumps ------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationManifest {
    pub categories: Vec<String>,
    pub pose: [f64; 3],
    /// Per camera: label `.smr` and height plane file, relative paths.
    pub cameras: Vec<[String; 2]>,
}

/// Label planes: one per map category (membership), then building and
/// unlabelled terrain. Rays without a hit have every plane clear.
fn observation_raster(cam: &CameraObservation, n: usize) -> MapRaster {
    let mut r = MapRaster::zeros(cam.width, cam.height, n + 2, 1.0, [0.0, 0.0]);
    let plane = cam.width * cam.height;
    for (i, (&label, &m)) in cam.labels.iter().zip(&cam.memberships).enumerate() {
        for c in 0..n {
            r.data[c * plane + i] = ((m >> c) & 1) as u8;
        }
        if label as usize == n {
            r.data[n * plane + i] = 1;
        } else if label as usize == n + 1 {
            r.data[(n + 1) * plane + i] = 1;
        }
    }
    r
}

fn observation_from_raster(r: &MapRaster, heights: &PlaneFile, n: usize, path: &Path) -> Result<CameraObservation> {
    if r.channels != n + 2 {
        return Err(CliError::Dimension(format!(
            "{}: expected {} label planes",
            path.display(),
            n + 2
        )));
    }
    if heights.header.width as usize != r.width
        || heights.header.height as usize != r.height
        || heights.header.planes != 1
    {
        return Err(CliError::Dimension(format!(
            "{}: height plane does not match labels",
            path.display()
        )));
    }
    let plane = r.width * r.height;
    let mut cam = CameraObservation {
        width: r.width,
        height: r.height,
        labels: Vec::with_capacity(plane),
        heights: heights.data.iter().map(|&v| f64::from(v)).collect(),
        memberships: Vec::with_capacity(plane),
    };
    for i in 0..plane {
        let mut m = 0u32;
        for c in 0..n {
            m |= u32::from(r.data[c * plane + i]) << c;
        }
        let label = if m != 0 {
            (31 - m.leading_zeros()) as u8
        } else if r.data[n * plane + i] != 0 {
            n as u8
        } else if r.data[(n + 1) * plane + i] != 0 {
            n as u8 + 1
        } else {
            SurroundObservation::NONE
        };
        cam.labels.push(label);
        cam.memberships.push(m);
    }
    Ok(cam)
}

/// Writes `obs.json` plus `camK.smr` / `camK.hgt` into `dir`.
pub fn save_observation(
    obs: &SurroundObservation,
    categories: &[String],
    pose: &EgoPose,
    dir: &Path,
    force: bool,
) -> Result<PathBuf> {
    let n = obs.num_categories;
    let mut cams = Vec::new();
    for (k, cam) in obs.cameras.iter().enumerate() {
        let labels = format!("cam{k}.smr");
        let heights = format!("cam{k}.hgt");
        save_raster(&observation_raster(cam, n), &dir.join(&labels), force)?;
        let plane = PlaneFile {
            header: Header {
                width: cam.width as u32,
                height: cam.height as u32,
                planes: 1,
                resolution: 1.0,
                origin: [0.0, 0.0],
            },
            data: cam.heights.iter().map(|&h| h as f32).collect(),
        };
        write_new(&dir.join(&heights), &encode_planes(&plane), force)?;
        cams.push([labels, heights]);
    }
    let manifest = ObservationManifest {
        categories: categories.to_vec(),
        pose: [pose.x, pose.y, pose.yaw],
        cameras: cams,
    };
    let path = dir.join("obs.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_new(&path, &bytes, force)?;
    Ok(path)
}

/// Loads an observation from its manifest; returns it with the category
/// names and the recorded pose.
pub fn load_observation(manifest: &Path) -> Result<(SurroundObservation, Vec<String>, EgoPose)> {
    let text = fs::read_to_string(manifest).map_err(|e| CliError::io(manifest, e))?;
    let m: ObservationManifest = serde_json::from_str(&text).map_err(|e| CliError::parse(manifest, e))?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let n = m.categories.len();
    let mut cameras = Vec::with_capacity(m.cameras.len());
    for [labels, heights] in &m.cameras {
        let lp = dir.join(labels);
        let hp = dir.join(heights);
        let r = load_raster(&lp)?;
        let h = decode_planes(&read(&hp)?, &hp)?;
        cameras.push(observation_from_raster(&r, &h, n, &lp)?);
    }
    let obs = SurroundObservation {
        num_categories: n,
        cameras,
    };
    Ok((obs, m.categories, EgoPose::new(m.pose[0], m.pose[1], m.pose[2])))
}
