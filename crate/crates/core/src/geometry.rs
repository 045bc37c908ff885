//! Pinhole cameras, planar ego poses and height-lifted inverse projective
//! mapping.
//!
//! Frames:
//! - ego: x forward, y left, z up, origin at the centre of the rear axle;
//! - camera: x right, y down, z along the optical axis;
//! - pixels: continuous `(u, v)` with the centre of pixel `(col, row)` at
//!   `(col, row)`.
//!
//! For a ground point `(x, y)` lifted to height `h` the camera sees
//! `λ·[u v 1]ᵀ = K·[R | t]·T_h·[x y 0 1]ᵀ`. Because the third homogeneous
//! coordinate is zero, the third column of `K·[R | t]·T_h` drops out and the
//! remaining 3×3 matrix is a plane-to-image homography that can be inverted
//! in closed form ([`PlaneHomography`]).

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::linalg::{rot_z, Mat3, Vec3};
use crate::{Error, Result};

/// Orthonormality tolerance for extrinsic rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Rays whose plane intersection would lie beyond `1 / PARALLEL_EPS` metres
/// (relative to the homogeneous scale) are treated as parallel to the plane.
const PARALLEL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraIntrinsics {
    pub focal_x: f64,
    pub focal_y: f64,
    pub principal_point: [f64; 2],
    /// `[width, height]` in pixels.
    pub image_size: [usize; 2],
}

impl CameraIntrinsics {
    pub fn new(focal_x: f64, focal_y: f64, principal_point: [f64; 2], image_size: [usize; 2]) -> Result<Self> {
        let k = CameraIntrinsics {
            focal_x,
            focal_y,
            principal_point,
            image_size,
        };
        k.validate()?;
        Ok(k)
    }

    /// Builds intrinsics from a row-major `K`. Skew must be zero.
    pub fn from_matrix(k: Mat3, width: usize, height: usize) -> Result<Self> {
        let m = k.0;
        if m[1][0] != 0.0 || m[2][0] != 0.0 || m[2][1] != 0.0 || m[2][2] != 1.0 {
            return Err(Error::InvalidCamera(
                "K must be upper triangular with K[2][2] = 1".into(),
            ));
        }
        if m[0][1] != 0.0 {
            return Err(Error::InvalidCamera("skewed intrinsics are not supported".into()));
        }
        Self::new(m[0][0], m[1][1], [m[0][2], m[1][2]], [width, height])
    }

    pub fn validate(&self) -> Result<()> {
        let [w, h] = self.image_size;
        if !(self.focal_x > 0.0 && self.focal_y > 0.0) || !self.focal_x.is_finite() || !self.focal_y.is_finite() {
            return Err(Error::InvalidCamera("focal lengths must be positive and finite".into()));
        }
        if w == 0 || h == 0 {
            return Err(Error::InvalidCamera("image size must be nonzero".into()));
        }
        let [cx, cy] = self.principal_point;
        if !(cx >= 0.0 && cx <= w as f64 && cy >= 0.0 && cy <= h as f64) {
            return Err(Error::InvalidCamera("principal point outside the image".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.image_size[0]
    }

    pub fn height(&self) -> usize {
        self.image_size[1]
    }

    pub fn matrix(&self) -> Mat3 {
        let [cx, cy] = self.principal_point;
        Mat3([[self.focal_x, 0.0, cx], [0.0, self.focal_y, cy], [0.0, 0.0, 1.0]])
    }

    /// Intrinsics of the same camera for an image downsampled by `stride`
    /// (box-averaged `stride × stride` blocks).
    pub fn downscaled(&self, stride: usize) -> Self {
        let s = stride.max(1) as f64;
        let [cx, cy] = self.principal_point;
        CameraIntrinsics {
            focal_x: self.focal_x / s,
            focal_y: self.focal_y / s,
            principal_point: [((cx + 0.5) / s - 0.5).max(0.0), ((cy + 0.5) / s - 0.5).max(0.0)],
            image_size: [
                (self.image_size[0] / stride.max(1)).max(1),
                (self.image_size[1] / stride.max(1)).max(1),
            ],
        }
    }
}

/// Rigid ego→camera transform; `P = [R | t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraExtrinsics {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl CameraExtrinsics {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let e = CameraExtrinsics { rotation, translation };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rotation.is_finite() || !self.translation.is_finite() {
            return Err(Error::InvalidCamera("extrinsics must be finite".into()));
        }
        let err = self.rotation.orthonormality_error();
        if err > ROTATION_TOLERANCE {
            return Err(Error::InvalidCamera(alloc::format!(
                "rotation is not orthonormal (|R·Rᵀ - I| = {err:e})"
            )));
        }
        if self.rotation.det() < 0.0 {
            return Err(Error::InvalidCamera("rotation has negative determinant".into()));
        }
        Ok(())
    }

    /// Camera mounted at `position` (ego frame), looking along heading
    /// `yaw` and tilted by `pitch` (negative looks down), no roll.
    pub fn from_mount(position: Vec3, yaw: f64, pitch: f64) -> Self {
        let (sy, cy) = libm::sincos(yaw);
        let (sp, cp) = libm::sincos(pitch);
        let forward = Vec3::new(cp * cy, cp * sy, sp);
        let right = Vec3::new(sy, -cy, 0.0);
        let down = forward.cross(right);
        let rotation = Mat3::from_rows(right, down, forward);
        let translation = -(rotation * position);
        CameraExtrinsics { rotation, translation }
    }

    /// Camera centre in the ego frame, `-Rᵀ t`.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    /// The 3×4 projection `[R | t]`, row-major.
    pub fn projection(&self) -> [[f64; 4]; 3] {
        let r = self.rotation.0;
        let t = self.translation.0;
        [
            [r[0][0], r[0][1], r[0][2], t[0]],
            [r[1][0], r[1][1], r[1][2], t[1]],
            [r[2][0], r[2][1], r[2][2], t[2]],
        ]
    }
}

/// Vertical lift of the ground reference plane to height `h` metres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeightLift(pub f64);

impl HeightLift {
    pub const GROUND: HeightLift = HeightLift(0.0);

    pub fn height(self) -> f64 {
        self.0
    }

    /// `T_h` as a row-major 4×4 matrix.
    pub fn matrix(self) -> [[f64; 4]; 4] {
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, self.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

/// A projected point: continuous pixel and projective depth `λ` (metres
/// along the optical axis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Why a pixel ray does not meet the lifted ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoIntersection {
    /// The reduced 3×3 matrix is singular (camera centre on the plane).
    Singular,
    /// The ray is parallel to the plane.
    Parallel,
    /// The intersection lies behind the camera.
    BehindCamera,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Camera {
    pub name: String,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
}

impl Camera {
    pub fn new(name: impl Into<String>, intrinsics: CameraIntrinsics, extrinsics: CameraExtrinsics) -> Result<Self> {
        intrinsics.validate()?;
        extrinsics.validate()?;
        Ok(Camera {
            name: name.into(),
            intrinsics,
            extrinsics,
        })
    }

    /// `K · P · T_h`, row-major 3×4.
    pub fn lifted_projection(&self, lift: HeightLift) -> [[f64; 4]; 3] {
        let p = self.extrinsics.projection();
        let t = lift.matrix();
        let k = self.intrinsics.matrix().0;
        let mut pt = [[0.0; 4]; 3];
        for i in 0..3 {
            for j in 0..4 {
                pt[i][j] = (0..4).map(|m| p[i][m] * t[m][j]).sum();
            }
        }
        let mut out = [[0.0; 4]; 3];
        for i in 0..3 {
            for j in 0..4 {
                out[i][j] = (0..3).map(|m| k[i][m] * pt[m][j]).sum();
            }
        }
        out
    }

    /// Plane-to-image homography for the ground plane lifted to `lift`.
    pub fn plane_homography(&self, lift: HeightLift) -> PlaneHomography {
        let kr = self.intrinsics.matrix() * self.extrinsics.rotation;
        let k = self.intrinsics.matrix();
        let offset = k * (self.extrinsics.translation + self.extrinsics.rotation.col(2).scale(lift.0));
        PlaneHomography::from_cols(kr.col(0), kr.col(1), offset)
    }

    /// Projects the ego-frame ground point `(x, y)` lifted to `lift`.
    /// `None` when the point is at or behind the camera (`λ <= 0`).
    pub fn ground_to_pixel(&self, ground: [f64; 2], lift: HeightLift) -> Option<Projection> {
        self.plane_homography(lift).project(ground)
    }

    /// Intersects the ray through `pixel` with the plane `z = h`.
    pub fn pixel_to_ground(&self, pixel: [f64; 2], lift: HeightLift) -> core::result::Result<[f64; 2], NoIntersection> {
        self.plane_homography(lift).unproject(pixel)
    }

    /// Camera centre in the ego frame.
    pub fn center(&self) -> Vec3 {
        self.extrinsics.center()
    }

    /// Unit-less viewing direction (ego frame) of the ray through `pixel`.
    pub fn ray_direction(&self, pixel: [f64; 2]) -> Vec3 {
        let k = &self.intrinsics;
        let dir_cam = Vec3::new(
            (pixel[0] - k.principal_point[0]) / k.focal_x,
            (pixel[1] - k.principal_point[1]) / k.focal_y,
            1.0,
        );
        self.extrinsics.rotation.transpose() * dir_cam
    }

    /// Same camera for features downsampled by `stride`.
    pub fn downscaled(&self, stride: usize) -> Camera {
        Camera {
            name: self.name.clone(),
            intrinsics: self.intrinsics.downscaled(stride),
            extrinsics: self.extrinsics,
        }
    }
}

/// The reduced matrix `[m₀ m₁ m₃]` of `K·P·T_h` and its closed-form inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneHomography {
    forward: Mat3,
    inverse: Option<Mat3>,
}

impl PlaneHomography {
    pub fn from_cols(cx: Vec3, cy: Vec3, offset: Vec3) -> Self {
        let forward = Mat3::from_cols(cx, cy, offset);
        PlaneHomography {
            forward,
            inverse: forward.inverse(),
        }
    }

    pub fn matrix(&self) -> Mat3 {
        self.forward
    }

    #[inline]
    pub fn project(&self, ground: [f64; 2]) -> Option<Projection> {
        let m = &self.forward.0;
        let [x, y] = ground;
        let depth = m[2][0] * x + m[2][1] * y + m[2][2];
        if !(depth > 0.0) {
            return None;
        }
        let u = (m[0][0] * x + m[0][1] * y + m[0][2]) / depth;
        let v = (m[1][0] * x + m[1][1] * y + m[1][2]) / depth;
        Some(Projection { u, v, depth })
    }

    pub fn unproject(&self, pixel: [f64; 2]) -> core::result::Result<[f64; 2], NoIntersection> {
        let inv = self.inverse.ok_or(NoIntersection::Singular)?;
        let q = inv * Vec3::new(pixel[0], pixel[1], 1.0);
        let planar = libm::fabs(q.x()).max(libm::fabs(q.y()));
        if !(libm::fabs(q.z()) > PARALLEL_EPS * planar) {
            return Err(NoIntersection::Parallel);
        }
        if q.z() < 0.0 {
            return Err(NoIntersection::BehindCamera);
        }
        Ok([q.x() / q.z(), q.y() / q.z()])
    }
}

/// Normalises an angle to `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    if !a.is_finite() {
        return a;
    }
    let mut r = libm::fmod(a, TAU);
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

/// Planar pose `ξ = (x, y, φ)`; maps ego coordinates into the map frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EgoPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl EgoPose {
    pub const IDENTITY: EgoPose = EgoPose {
        x: 0.0,
        y: 0.0,
        yaw: 0.0,
    };

    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        EgoPose {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// `self ∘ other`: apply `other`, then `self`.
    pub fn compose(&self, other: &EgoPose) -> EgoPose {
        let (s, c) = libm::sincos(self.yaw);
        EgoPose::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.yaw + other.yaw,
        )
    }

    pub fn inverse(&self) -> EgoPose {
        let (s, c) = libm::sincos(self.yaw);
        EgoPose::new(-c * self.x - s * self.y, s * self.x - c * self.y, -self.yaw)
    }

    /// Ego-frame point to map frame.
    #[inline]
    pub fn transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = libm::sincos(self.yaw);
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    /// Map-frame point to ego frame.
    #[inline]
    pub fn inverse_transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = libm::sincos(self.yaw);
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// 3D rotation matrix of the heading.
    pub fn rotation(&self) -> Mat3 {
        rot_z(self.yaw)
    }

    pub fn distance_to(&self, other: &EgoPose) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Parameters of the default surround rig: `count` identical cameras spaced
/// evenly in heading on a ring around a mount point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SurroundRigSpec {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub horizontal_fov_deg: f64,
    /// Mount centre in the ego frame, metres.
    pub mount: [f64; 3],
    /// Horizontal offset of each camera from the mount centre along its
    /// viewing direction, metres.
    pub ring_radius: f64,
    pub pitch_deg: f64,
}

impl Default for SurroundRigSpec {
    fn default() -> Self {
        SurroundRigSpec {
            count: 6,
            width: 544,
            height: 224,
            horizontal_fov_deg: 70.0,
            mount: [1.3, 0.0, 1.5],
            ring_radius: 0.8,
            pitch_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraRig {
    pub cameras: Vec<Camera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::InvalidCamera("rig has no cameras".into()));
        }
        for cam in &cameras {
            cam.intrinsics.validate()?;
            cam.extrinsics.validate()?;
        }
        Ok(CameraRig { cameras })
    }

    pub fn surround(spec: &SurroundRigSpec) -> Result<Self> {
        if spec.count == 0 {
            return Err(Error::InvalidCamera("rig has no cameras".into()));
        }
        if !(spec.horizontal_fov_deg > 0.0 && spec.horizontal_fov_deg < 180.0) {
            return Err(Error::InvalidCamera(
                "horizontal fov must be in (0, 180) degrees".into(),
            ));
        }
        let half = (spec.horizontal_fov_deg * 0.5).to_radians();
        let focal = (spec.width as f64 * 0.5) / libm::tan(half);
        let intrinsics = CameraIntrinsics::new(
            focal,
            focal,
            [(spec.width as f64 - 1.0) * 0.5, (spec.height as f64 - 1.0) * 0.5],
            [spec.width, spec.height],
        )?;
        let pitch = spec.pitch_deg.to_radians();
        let cameras = (0..spec.count)
            .map(|i| {
                let yaw = TAU * i as f64 / spec.count as f64;
                let (s, c) = libm::sincos(yaw);
                let position = Vec3::new(
                    spec.mount[0] + spec.ring_radius * c,
                    spec.mount[1] + spec.ring_radius * s,
                    spec.mount[2],
                );
                Camera::new(
                    alloc::format!("cam{i}"),
                    intrinsics,
                    CameraExtrinsics::from_mount(position, yaw, pitch),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CameraRig { cameras })
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn downscaled(&self, stride: usize) -> CameraRig {
        CameraRig {
            cameras: self.cameras.iter().map(|c| c.downscaled(stride)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn nadir_camera() -> Camera {
        // Looking straight down from 1.5 m over the origin; image x along
        // ego -y, image y along ego -x.
        let rotation = Mat3([[0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]);
        let extr = CameraExtrinsics::new(rotation, -(rotation * Vec3::new(0.0, 0.0, 1.5))).unwrap();
        let intr = CameraIntrinsics::new(100.0, 100.0, [50.0, 50.0], [100, 100]).unwrap();
        Camera::new("nadir", intr, extr).unwrap()
    }

    #[test]
    fn nadir_principal_axis_point() {
        let cam = nadir_camera();
        let p = cam.ground_to_pixel([0.0, 0.0], HeightLift::GROUND).unwrap();
        assert_abs_diff_eq!(p.u, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.v, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.depth, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn nadir_similar_triangles_offset() {
        let cam = nadir_camera();
        let p = cam.ground_to_pixel([0.15, 0.0], HeightLift::GROUND).unwrap();
        let offset = ((p.u - 50.0).powi(2) + (p.v - 50.0).powi(2)).sqrt();
        assert_abs_diff_eq!(offset, 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.depth * offset / 100.0, 0.15, epsilon = 1e-12);
    }

    #[test]
    fn nadir_inverse() {
        let cam = nadir_camera();
        let g = cam.pixel_to_ground([50.0, 50.0], HeightLift::GROUND).unwrap();
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn horizon_pixel_has_no_intersection() {
        let intr = CameraIntrinsics::new(500.0, 500.0, [272.0, 112.0], [544, 224]).unwrap();
        let extr = CameraExtrinsics::from_mount(Vec3::new(0.0, 0.0, 1.5), 0.0, 0.0);
        let cam = Camera::new("front", intr, extr).unwrap();
        assert_eq!(
            cam.pixel_to_ground([272.0, 112.0], HeightLift::GROUND),
            Err(NoIntersection::Parallel)
        );
        assert_eq!(
            cam.pixel_to_ground([100.0, 112.0], HeightLift::GROUND),
            Err(NoIntersection::Parallel)
        );
        // Above the horizon the ray meets the plane behind the camera.
        assert_eq!(
            cam.pixel_to_ground([272.0, 50.0], HeightLift::GROUND),
            Err(NoIntersection::BehindCamera)
        );
    }

    #[test]
    fn camera_on_the_plane_is_singular() {
        let intr = CameraIntrinsics::new(500.0, 500.0, [272.0, 112.0], [544, 224]).unwrap();
        let extr = CameraExtrinsics::from_mount(Vec3::new(0.0, 0.0, 1.0), 0.0, -0.2);
        let cam = Camera::new("front", intr, extr).unwrap();
        assert_eq!(
            cam.pixel_to_ground([272.0, 150.0], HeightLift(1.0)),
            Err(NoIntersection::Singular)
        );
    }

    #[test]
    fn behind_camera_is_reported_not_clamped() {
        let intr = CameraIntrinsics::new(500.0, 500.0, [272.0, 112.0], [544, 224]).unwrap();
        let extr = CameraExtrinsics::from_mount(Vec3::new(0.0, 0.0, 1.5), 0.0, 0.0);
        let cam = Camera::new("front", intr, extr).unwrap();
        assert!(cam.ground_to_pixel([-5.0, 0.0], HeightLift::GROUND).is_none());
        assert!(cam.ground_to_pixel([0.0, 3.0], HeightLift::GROUND).is_none());
    }

    #[test]
    fn invalid_cameras_are_rejected() {
        assert!(CameraIntrinsics::new(0.0, 1.0, [1.0, 1.0], [4, 4]).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, [5.0, 1.0], [4, 4]).is_err());
        let skew = Mat3([[1.0, 0.1, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]);
        assert!(CameraIntrinsics::from_matrix(skew, 4, 4).is_err());
        let not_rot = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 1e-6], [0.0, 0.0, 1.0]]);
        assert!(CameraExtrinsics::new(not_rot, Vec3::ZERO).is_err());
        let mirror = Mat3([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(CameraExtrinsics::new(mirror, Vec3::ZERO).is_err());
    }

    #[test]
    fn lift_matrix_is_vertical_translation() {
        let t = HeightLift(0.0).matrix();
        for (i, row) in t.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(HeightLift(2.0).matrix()[2][3], 2.0);
    }

    #[test]
    fn mount_constructor_center_roundtrip() {
        let pos = Vec3::new(1.2, -0.4, 1.6);
        let e = CameraExtrinsics::from_mount(pos, 0.9, -0.1);
        e.validate().unwrap();
        let c = e.center();
        for i in 0..3 {
            assert_abs_diff_eq!(c[i], pos[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn pose_quarter_turn() {
        let a = EgoPose::new(1.0, 0.0, PI / 2.0);
        let b = EgoPose::new(1.0, 0.0, 0.0);
        let c = a.compose(&b);
        assert_abs_diff_eq!(c.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.yaw, PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pose_identity_and_inverse() {
        let p = EgoPose::new(3.5, -2.0, 2.8);
        assert_eq!(EgoPose::IDENTITY.compose(&p), p);
        let id = p.compose(&p.inverse());
        assert_abs_diff_eq!(id.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id.yaw, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn yaw_normalisation_range() {
        assert_eq!(normalize_angle(-PI), PI);
        assert_eq!(normalize_angle(PI), PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(-3.5 * PI), 0.5 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(7.0), 7.0 - TAU, epsilon = 1e-12);
    }

    #[test]
    fn surround_rig_defaults() {
        let rig = CameraRig::surround(&SurroundRigSpec::default()).unwrap();
        assert_eq!(rig.len(), 6);
        for cam in &rig.cameras {
            assert_eq!(cam.intrinsics.image_size, [544, 224]);
            assert_abs_diff_eq!(cam.center().z(), 1.5, epsilon = 1e-12);
        }
    }
}
