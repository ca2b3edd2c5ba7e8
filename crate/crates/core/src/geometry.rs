//! Gaze geometry: 2D gaze pixel plus depth to a 3D gaze point, and the rigid
//! transform chain camera → world → robot.
//!
//! Camera frame: +z along the optical axis, +x rightward in the image, +y
//! upward. Pixel coordinates are centre-origin with +y upward.

use core::fmt;

use nalgebra::{Matrix3, Rotation3, Unit, UnitQuaternion, Vector3};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when validating rotation matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Wrist offsets at or above this magnitude are treated as failed calibrations.
pub const MAX_WRIST_OFFSET_M: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("pixel {axis} coordinate {value} outside ±{limit}")]
    PixelOutOfBounds {
        axis: Axis,
        value: f64,
        limit: f64,
    },
    #[error("depth must be positive and finite, got {0}")]
    InvalidDepth(f64),
    #[error("gaze angle {0} rad is not strictly inside ±π/2")]
    InvalidAngle(f64),
    #[error("invalid camera model: {0}")]
    InvalidCamera(&'static str),
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: Frame, found: Frame },
    #[error("rotation is not orthonormal with determinant +1")]
    NotOrthonormal,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("wrist offset magnitude {0:.3} m exceeds calibration bound")]
    CalibrationFailed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Horizontal,
    Vertical,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Horizontal => f.write_str("horizontal"),
            Axis::Vertical => f.write_str("vertical"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Camera,
    World,
    Robot,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frame::Camera => f.write_str("camera"),
            Frame::World => f.write_str("world"),
            Frame::Robot => f.write_str("robot"),
        }
    }
}

/// Image extents and half field-of-view angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraRepr", into = "CameraRepr")]
pub struct CameraModel {
    width_px: u32,
    height_px: u32,
    half_fov_h: f64,
    half_fov_v: f64,
}

#[derive(Serialize, Deserialize)]
struct CameraRepr {
    width_px: u32,
    height_px: u32,
    half_fov_h: f64,
    half_fov_v: f64,
}

impl TryFrom<CameraRepr> for CameraModel {
    type Error = GeometryError;
    fn try_from(r: CameraRepr) -> Result<Self, Self::Error> {
        CameraModel::new(r.width_px, r.height_px, r.half_fov_h, r.half_fov_v)
    }
}

impl From<CameraModel> for CameraRepr {
    fn from(c: CameraModel) -> Self {
        CameraRepr {
            width_px: c.width_px,
            height_px: c.height_px,
            half_fov_h: c.half_fov_h,
            half_fov_v: c.half_fov_v,
        }
    }
}

impl CameraModel {
    pub fn new(
        width_px: u32,
        height_px: u32,
        half_fov_h: f64,
        half_fov_v: f64,
    ) -> Result<Self, GeometryError> {
        if width_px < 2 || height_px < 2 {
            return Err(GeometryError::InvalidCamera("image must be at least 2x2 pixels"));
        }
        let half_pi = core::f64::consts::FRAC_PI_2;
        for a in [half_fov_h, half_fov_v] {
            if !(a > 0.0 && a < half_pi) {
                return Err(GeometryError::InvalidCamera("half-FOV must lie in (0, π/2)"));
            }
        }
        Ok(Self {
            width_px,
            height_px,
            half_fov_h,
            half_fov_v,
        })
    }

    pub fn from_degrees(
        width_px: u32,
        height_px: u32,
        half_fov_h_deg: f64,
        half_fov_v_deg: f64,
    ) -> Result<Self, GeometryError> {
        Self::new(
            width_px,
            height_px,
            half_fov_h_deg.to_radians(),
            half_fov_v_deg.to_radians(),
        )
    }

    pub fn width_px(&self) -> u32 {
        self.width_px
    }

    pub fn height_px(&self) -> u32 {
        self.height_px
    }

    pub fn half_fov_h(&self) -> f64 {
        self.half_fov_h
    }

    pub fn half_fov_v(&self) -> f64 {
        self.half_fov_v
    }

    pub fn half_width(&self) -> f64 {
        f64::from(self.width_px) / 2.0
    }

    pub fn half_height(&self) -> f64 {
        f64::from(self.height_px) / 2.0
    }

    /// True when the centre-origin pixel lies inside the image (closed bounds).
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px.abs() <= self.half_width() && py.abs() <= self.half_height()
    }

    /// Clamp a centre-origin pixel into the image.
    pub fn clamp(&self, px: f64, py: f64) -> (f64, f64) {
        (
            px.clamp(-self.half_width(), self.half_width()),
            py.clamp(-self.half_height(), self.half_height()),
        )
    }

    /// Recentre a top-left-origin, y-down pixel into the centre-origin, y-up convention.
    pub fn recentre(&self, u: f64, v: f64) -> (f64, f64) {
        (u - self.half_width(), self.half_height() - v)
    }
}

impl Default for CameraModel {
    /// 1280×720 with the D435 RGB field of view (69° × 42°).
    fn default() -> Self {
        Self::from_degrees(1280, 720, 34.5, 21.0).expect("default camera is valid")
    }
}

/// A centre-origin gaze pixel with the depth reading under it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazePixel {
    pub px: f64,
    pub py: f64,
    pub depth_m: f64,
}

impl GazePixel {
    pub fn new(px: f64, py: f64, depth_m: f64) -> Self {
        Self { px, py, depth_m }
    }

    pub fn has_valid_depth(&self) -> bool {
        self.depth_m.is_finite() && self.depth_m > 0.0
    }

    fn check_bounds(&self, cam: &CameraModel) -> Result<(), GeometryError> {
        if !self.px.is_finite() || !self.py.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if self.px.abs() > cam.half_width() {
            return Err(GeometryError::PixelOutOfBounds {
                axis: Axis::Horizontal,
                value: self.px,
                limit: cam.half_width(),
            });
        }
        if self.py.abs() > cam.half_height() {
            return Err(GeometryError::PixelOutOfBounds {
                axis: Axis::Vertical,
                value: self.py,
                limit: cam.half_height(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeAngles {
    pub alpha_h: f64,
    pub alpha_v: f64,
}

/// A 3D point tagged with the frame its coordinates are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub frame: Frame,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64, frame: Frame) -> Self {
        Self { x, y, z, frame }
    }

    pub const fn camera(x: f64, y: f64, z: f64) -> Self {
        Self::new(x, y, z, Frame::Camera)
    }

    pub const fn world(x: f64, y: f64, z: f64) -> Self {
        Self::new(x, y, z, Frame::World)
    }

    pub const fn robot(x: f64, y: f64, z: f64) -> Self {
        Self::new(x, y, z, Frame::Robot)
    }

    pub fn from_vector(v: Vector3<f64>, frame: Frame) -> Self {
        Self::new(v.x, v.y, v.z, frame)
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        self.vector().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn with_frame(self, frame: Frame) -> Self {
        Self { frame, ..self }
    }

    /// Translate by a vector expressed in the same frame.
    pub fn offset(self, v: Vector3<f64>) -> Self {
        Self::from_vector(self.vector() + v, self.frame)
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        (self.vector() - other.vector()).norm()
    }

    pub fn expect_frame(&self, frame: Frame) -> Result<(), GeometryError> {
        if self.frame == frame {
            Ok(())
        } else {
            Err(GeometryError::FrameMismatch {
                expected: frame,
                found: self.frame,
            })
        }
    }
}

/// Rigid motion taking coordinates in `from_frame` to `to_frame`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "TransformRepr", try_from = "TransformRepr")]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
    from_frame: Frame,
    to_frame: Frame,
}

/// Wire form: translation in metres and a `[w, x, y, z]` quaternion.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformRepr {
    from_frame: Frame,
    to_frame: Frame,
    translation: [f64; 3],
    quaternion_wxyz: [f64; 4],
}

impl From<RigidTransform> for TransformRepr {
    fn from(t: RigidTransform) -> Self {
        let q = t.rotation.quaternion();
        TransformRepr {
            from_frame: t.from_frame,
            to_frame: t.to_frame,
            translation: [t.translation.x, t.translation.y, t.translation.z],
            quaternion_wxyz: [q.w, q.i, q.j, q.k],
        }
    }
}

impl TryFrom<TransformRepr> for RigidTransform {
    type Error = GeometryError;
    fn try_from(r: TransformRepr) -> Result<Self, Self::Error> {
        let [w, x, y, z] = r.quaternion_wxyz;
        RigidTransform::from_quaternion(
            [w, x, y, z],
            Vector3::from(r.translation),
            r.from_frame,
            r.to_frame,
        )
    }
}

impl RigidTransform {
    pub fn identity(from_frame: Frame, to_frame: Frame) -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            from_frame,
            to_frame,
        }
    }

    pub fn translation(v: Vector3<f64>, from_frame: Frame, to_frame: Frame) -> Self {
        Self {
            translation: v,
            ..Self::identity(from_frame, to_frame)
        }
    }

    /// Rotation of `angle` radians about `axis`, no translation.
    pub fn rotation_about(
        axis: Vector3<f64>,
        angle: f64,
        from_frame: Frame,
        to_frame: Frame,
    ) -> Self {
        Self {
            rotation: UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle),
            ..Self::identity(from_frame, to_frame)
        }
    }

    /// Build from a rotation matrix, rejecting anything that is not a proper rotation.
    pub fn from_matrix(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        from_frame: Frame,
        to_frame: Frame,
    ) -> Result<Self, GeometryError> {
        if !is_proper_rotation(&rotation, ROTATION_TOLERANCE) {
            return Err(GeometryError::NotOrthonormal);
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let rot = Rotation3::from_matrix_unchecked(rotation);
        Ok(Self {
            rotation: UnitQuaternion::from_rotation_matrix(&rot),
            translation,
            from_frame,
            to_frame,
        })
    }

    /// Build from a `[w, x, y, z]` quaternion, normalising it.
    pub fn from_quaternion(
        wxyz: [f64; 4],
        translation: Vector3<f64>,
        from_frame: Frame,
        to_frame: Frame,
    ) -> Result<Self, GeometryError> {
        let [w, x, y, z] = wxyz;
        let q = nalgebra::Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 || !translation.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self {
            rotation: UnitQuaternion::from_quaternion(q),
            translation,
            from_frame,
            to_frame,
        })
    }

    /// Pose of a camera at `eye` looking at `target`, with `up` projected onto the
    /// image plane as the image +y direction. The result maps camera to `to_frame`.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        to_frame: Frame,
    ) -> Result<Self, GeometryError> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(GeometryError::InvalidCamera("look-at target coincides with eye"));
        }
        let cz = forward.normalize();
        let up_perp = up - cz * up.dot(&cz);
        if up_perp.norm() < 1e-9 {
            return Err(GeometryError::InvalidCamera("up vector parallel to view direction"));
        }
        let cy = up_perp.normalize();
        // det +1 forces cx = cy × cz
        let cx = cy.cross(&cz);
        let m = Matrix3::from_columns(&[cx, cy, cz]);
        Self::from_matrix(m, eye, Frame::Camera, to_frame)
    }

    pub fn from_frame(&self) -> Frame {
        self.from_frame
    }

    pub fn to_frame(&self) -> Frame {
        self.to_frame
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.rotation.to_rotation_matrix().matrix()
    }

    pub fn translation_vector(&self) -> Vector3<f64> {
        self.translation
    }

    /// Same motion with the frame labels replaced.
    pub fn relabel(self, from_frame: Frame, to_frame: Frame) -> Self {
        Self {
            from_frame,
            to_frame,
            ..self
        }
    }

    /// Right-multiply the rotation by an extra rotation, keeping the translation.
    pub fn perturbed(&self, rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: self.rotation * rotation,
            translation: self.translation + translation,
            ..*self
        }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &RigidTransform) -> Result<RigidTransform, GeometryError> {
        if self.from_frame != first.to_frame {
            return Err(GeometryError::FrameMismatch {
                expected: self.from_frame,
                found: first.to_frame,
            });
        }
        Ok(Self {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
            from_frame: first.from_frame,
            to_frame: self.to_frame,
        })
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        Self {
            rotation: inv,
            translation: -(inv * self.translation),
            from_frame: self.to_frame,
            to_frame: self.from_frame,
        }
    }

    pub fn apply(&self, p: &Point3) -> Result<Point3, GeometryError> {
        p.expect_frame(self.from_frame)?;
        let v = self.rotation * p.vector() + self.translation;
        Ok(Point3::from_vector(v, self.to_frame))
    }

    /// Rotate a direction vector (no translation).
    pub fn apply_vector(&self, v: Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }
}

fn is_proper_rotation(m: &Matrix3<f64>, tol: f64) -> bool {
    if !m.iter().all(|c| c.is_finite()) {
        return false;
    }
    let gram = m.transpose() * m;
    let ortho = (gram - Matrix3::identity()).iter().all(|e| e.abs() <= tol);
    ortho && (m.determinant() - 1.0).abs() <= tol
}

/// Calibrated vector from the user's grasp point to the robot TCP (robot frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct WristOffset {
    offset: Vector3<f64>,
}

impl WristOffset {
    pub fn new(offset: Vector3<f64>) -> Result<Self, GeometryError> {
        if !offset.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let m = offset.norm();
        if m >= MAX_WRIST_OFFSET_M {
            return Err(GeometryError::CalibrationFailed(m));
        }
        Ok(Self { offset })
    }

    pub fn zero() -> Self {
        Self {
            offset: Vector3::zeros(),
        }
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.offset
    }

    /// TCP position that puts the user's grasp point at `target`.
    pub fn tcp_for(&self, target: &Point3) -> Point3 {
        target.offset(self.offset)
    }

    /// Grasp-point position for a given TCP.
    pub fn hand_at(&self, tcp: &Point3) -> Point3 {
        tcp.offset(-self.offset)
    }
}

impl Default for WristOffset {
    fn default() -> Self {
        Self::zero()
    }
}

impl TryFrom<[f64; 3]> for WristOffset {
    type Error = GeometryError;
    fn try_from(v: [f64; 3]) -> Result<Self, Self::Error> {
        WristOffset::new(Vector3::from(v))
    }
}

impl From<WristOffset> for [f64; 3] {
    fn from(w: WristOffset) -> Self {
        [w.offset.x, w.offset.y, w.offset.z]
    }
}

/// Gaze angle from pixel offset: `α = arctan((P / (extent/2)) · tan(half_fov))`.
pub fn pixel_to_angles(pixel: &GazePixel, cam: &CameraModel) -> Result<GazeAngles, GeometryError> {
    pixel.check_bounds(cam)?;
    let alpha_h = (pixel.px / cam.half_width() * cam.half_fov_h.tan()).atan();
    let alpha_v = (pixel.py / cam.half_height() * cam.half_fov_v.tan()).atan();
    Ok(GazeAngles { alpha_h, alpha_v })
}

/// Solve for the projections of the gaze ray onto the horizontal and vertical
/// planes, `(d_gH, d_gV)`, from
///
/// ```text
/// sin²(α_H)·d_H² + d_V² = d²
/// d_H² + sin²(α_V)·d_V² = d²
/// ```
pub fn solve_projections(angles: &GazeAngles, depth_m: f64) -> Result<(f64, f64), GeometryError> {
    let half_pi = core::f64::consts::FRAC_PI_2;
    for a in [angles.alpha_h, angles.alpha_v] {
        if !(a.abs() < half_pi) {
            return Err(GeometryError::InvalidAngle(a));
        }
    }
    if !(depth_m.is_finite() && depth_m > 0.0) {
        return Err(GeometryError::InvalidDepth(depth_m));
    }
    let sh = angles.alpha_h.sin();
    let sv = angles.alpha_v.sin();
    let ch = angles.alpha_h.cos();
    let cv = angles.alpha_v.cos();
    let d2 = depth_m * depth_m;
    let denom = 1.0 - sh * sh * sv * sv;
    let dh2 = d2 * cv * cv / denom;
    let dv2 = d2 * ch * ch / denom;
    Ok((dh2.sqrt(), dv2.sqrt()))
}

/// Backproject a gaze pixel with depth into a camera-frame point whose norm is
/// the depth reading.
pub fn backproject(pixel: &GazePixel, cam: &CameraModel) -> Result<Point3, GeometryError> {
    let angles = pixel_to_angles(pixel, cam)?;
    let (d_h, d_v) = solve_projections(&angles, pixel.depth_m)?;
    let gx = d_h * angles.alpha_h.sin();
    let gy = d_v * angles.alpha_v.sin();
    let d = pixel.depth_m;
    let gz = (d * d - gx * gx - gy * gy).max(0.0).sqrt();
    Ok(Point3::camera(gx, gy, gz))
}

/// Pinhole forward projection of a camera-frame point to a centre-origin pixel
/// and its Euclidean range. `None` for points on or behind the image plane.
pub fn project(p: &Point3, cam: &CameraModel) -> Result<Option<GazePixel>, GeometryError> {
    p.expect_frame(Frame::Camera)?;
    if !p.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    if p.z <= 0.0 {
        return Ok(None);
    }
    let px = cam.half_width() * (p.x / p.z) / cam.half_fov_h.tan();
    let py = cam.half_height() * (p.y / p.z) / cam.half_fov_v.tan();
    Ok(Some(GazePixel::new(px, py, p.norm())))
}

/// Camera-frame unit ray through a centre-origin pixel.
pub fn pixel_ray(px: f64, py: f64, cam: &CameraModel) -> Vector3<f64> {
    let th = px / cam.half_width() * cam.half_fov_h.tan();
    let tv = py / cam.half_height() * cam.half_fov_v.tan();
    Vector3::new(th, tv, 1.0).normalize()
}

/// Full chain: backproject, then head pose (camera → world), then world → robot.
pub fn gaze_to_robot_frame(
    pixel: &GazePixel,
    cam: &CameraModel,
    head_pose: &RigidTransform,
    world_to_robot: &RigidTransform,
) -> Result<Point3, GeometryError> {
    let chain = world_to_robot.compose(head_pose)?;
    if chain.from_frame != Frame::Camera || chain.to_frame != Frame::Robot {
        return Err(GeometryError::FrameMismatch {
            expected: Frame::Robot,
            found: chain.to_frame,
        });
    }
    let p = backproject(pixel, cam)?;
    let world = head_pose.apply(&p)?;
    world_to_robot.apply(&world)
}

/// Offset from the gazed palm position to the current TCP, both in the robot frame.
pub fn calibrate_wrist_offset(
    gaze_at_palm: &Point3,
    robot_tcp: &Point3,
) -> Result<WristOffset, GeometryError> {
    gaze_at_palm.expect_frame(Frame::Robot)?;
    robot_tcp.expect_frame(Frame::Robot)?;
    WristOffset::new(robot_tcp.vector() - gaze_at_palm.vector())
}
