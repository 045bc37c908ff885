//! Height-layered bird's-eye-view reconstruction and SD-map relocalization.
//!
//! The crate is `no_std` (it needs `alloc`) and carries the whole algorithmic
//! pipeline:
//!
//! - [`geometry`]: pinhole cameras, planar ego poses and the height-lifted
//!   inverse projective mapping between pixels and ground coordinates.
//! - [`semantic_map`]: polygon SD maps, N-channel boolean rasterization and
//!   prior-centred tile cropping.
//! - [`synthworld`]: procedural road-network worlds and an analytic raycaster
//!   producing surround-view semantic and height images.
//! - [`bev`]: projection of per-camera features into a height-layered
//!   occupancy volume and its flattening to a semantic BEV grid.
//! - [`localizer`]: feature encoders, masked cosine template matching,
//!   2D softmax and soft-argmax pose readout.
//! - [`metrics`]: IoU and recall accuracy.
//!
//! File formats, the experiment harness and the CLI live in the `heightbev`
//! crate.
//!
//! # Features
//! - `std`: implements `std::error::Error` for [`Error`].
//! - `parallel`: row-parallel rasterization, rendering, projection and
//!   matching via `rayon` (implies `std`). Results are identical with and
//!   without it.
//! - `serde`: `Serialize`/`Deserialize` for specs and configs.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod bev;
mod error;
mod fft;
pub mod geometry;
pub mod linalg;
pub mod localizer;
pub mod metrics;
mod par;
pub mod semantic_map;
pub mod synthworld;

pub use error::{Error, Result};
pub use geometry::{
    Camera, CameraExtrinsics, CameraIntrinsics, CameraRig, EgoPose, HeightLift, NoIntersection, Projection,
};
pub use semantic_map::{Bounds, MapRaster, MapTile, Polygon, SemanticMap};
