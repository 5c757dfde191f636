//! Reference frames and pinhole camera math.
//!
//! World frame: `x` along the road, `y` to the left, `z` up, road plane at
//! `z = 0`. A camera at zero rotation looks along world `+x`; its attitude is
//! applied as intrinsic yaw (about `z`), then pitch (positive tilts the
//! optical axis below the horizon), then roll (about the optical axis).
//! The optical frame used by `K` is `u` right, `v` down, depth forward.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("pixel ray does not intersect the ground plane")]
    NoIntersection,
    #[error("depth must be positive and finite, got {0}")]
    InvalidDepth(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Image coordinates. Pixel `(i, j)` covers `[i, i + 1) x [j, j + 1)`, so
/// its center sits at `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Planar pose with heading wrapped to `[-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
        }
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (x - self.x).hypot(y - self.y)
    }
}

/// Wraps an angle into `[-pi, pi]`. Both `pi` and `-pi` map to `+pi`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        PI
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Camera center `C`.
    pub position: WorldPoint,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let invalid = |msg: &str| Err(GeometryError::InvalidCamera(msg.to_string()));
        let scalars = [
            self.roll, self.pitch, self.yaw, self.fx, self.fy, self.cx, self.cy,
        ];
        if !self.position.is_finite() || scalars.iter().any(|s| !s.is_finite()) {
            return invalid("non-finite parameter");
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return invalid("focal lengths must be positive");
        }
        if !(self.cx > 0.0 && self.cx < f64::from(self.width)) {
            return invalid("cx outside image");
        }
        if !(self.cy > 0.0 && self.cy < f64::from(self.height)) {
            return invalid("cy outside image");
        }
        if self.position.z <= 0.0 {
            return invalid("camera must be above the road plane");
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// World-to-optical rotation `R`.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (sr, cr) = self.roll.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
        let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
        // body axes expressed in world
        let world_from_body = rz * ry * rx;
        // body (forward, left, up) -> optical (right, down, forward)
        let optical_from_body = Matrix3::new(
            0.0, -1.0, 0.0, //
            0.0, 0.0, -1.0, //
            1.0, 0.0, 0.0,
        );
        optical_from_body * world_from_body.transpose()
    }

    /// The 3x4 camera matrix `[M | p4] = K [R | t]` with `t = -R C`.
    pub fn camera_matrix(&self) -> Result<Matrix3x4<f64>, GeometryError> {
        Ok(self.projector()?.matrix)
    }

    pub fn projector(&self) -> Result<Projector, GeometryError> {
        self.validate()?;
        let r = self.rotation();
        let c = self.position.to_vector();
        let t = -(r * c);
        let k = self.intrinsics();
        let m = k * r;
        let p4 = k * t;
        let m_inv = m.try_inverse().ok_or_else(|| {
            GeometryError::InvalidCamera("camera matrix M is singular".to_string())
        })?;
        let mut matrix = Matrix3x4::zeros();
        matrix.fixed_view_mut::<3, 3>(0, 0).copy_from(&m);
        matrix.set_column(3, &p4);
        Ok(Projector {
            matrix,
            m_inv,
            m3_norm: m.row(2).norm(),
            center: c,
            width: self.width,
            height: self.height,
        })
    }

    pub fn project(&self, p: WorldPoint) -> Result<PixelPoint, GeometryError> {
        self.projector()?.project(p)
    }

    pub fn back_project_ground(&self, p: PixelPoint) -> Result<WorldPoint, GeometryError> {
        self.projector()?.back_project_ground(p)
    }

    pub fn back_project_depth(&self, p: PixelPoint, depth: f64) -> Result<WorldPoint, GeometryError> {
        self.projector()?.back_project_depth(p, depth)
    }

    pub fn in_image(&self, p: PixelPoint) -> bool {
        p.u >= 0.0 && p.v >= 0.0 && p.u < f64::from(self.width) && p.v < f64::from(self.height)
    }

    /// Ground interval `[near, far]` covered by the image's center column,
    /// measured along the camera's horizontal viewing direction from its
    /// foot point. `None` when the top image edge does not reach the ground.
    pub fn footprint_x(&self) -> Result<Option<(f64, f64)>, GeometryError> {
        let proj = self.projector()?;
        let near = proj.back_project_ground(PixelPoint::new(self.cx, f64::from(self.height)));
        let far = proj.back_project_ground(PixelPoint::new(self.cx, 0.0));
        match (near, far) {
            (Ok(n), Ok(f)) => Ok(Some((n.x.min(f.x), n.x.max(f.x)))),
            (Err(GeometryError::NoIntersection), _) | (_, Err(GeometryError::NoIntersection)) => {
                Ok(None)
            }
            (Err(e), _) | (_, Err(e)) => Err(e),
        }
    }
}

/// Precomputed camera matrix and its inverse sub-matrix for repeated use.
#[derive(Debug, Clone)]
pub struct Projector {
    matrix: Matrix3x4<f64>,
    m_inv: Matrix3<f64>,
    m3_norm: f64,
    center: Vector3<f64>,
    width: u32,
    height: u32,
}

impl Projector {
    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.matrix
    }

    pub fn center(&self) -> WorldPoint {
        WorldPoint::from_vector(self.center)
    }

    pub fn image_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Homogeneous projection; `BehindCamera` when `w <= 0`.
    pub fn project(&self, p: WorldPoint) -> Result<PixelPoint, GeometryError> {
        self.project_homogeneous(Vector4::new(p.x, p.y, p.z, 1.0))
    }

    pub fn project_homogeneous(&self, p: Vector4<f64>) -> Result<PixelPoint, GeometryError> {
        let h = self.matrix * p;
        if h.z <= 0.0 {
            return Err(GeometryError::BehindCamera);
        }
        Ok(PixelPoint::new(h.x / h.z, h.y / h.z))
    }

    fn ray(&self, p: PixelPoint) -> Vector3<f64> {
        self.m_inv * Vector3::new(p.u, p.v, 1.0)
    }

    /// Intersects the ray `C + lambda M^-1 p` with the plane `z = 0`.
    pub fn back_project_ground(&self, p: PixelPoint) -> Result<WorldPoint, GeometryError> {
        let dir = self.ray(p);
        if dir.z.abs() < 1e-15 {
            return Err(GeometryError::NoIntersection);
        }
        let lambda = -self.center.z / dir.z;
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(GeometryError::NoIntersection);
        }
        let q = self.center + dir * lambda;
        Ok(WorldPoint::new(q.x, q.y, 0.0))
    }

    /// Back-projects to camera-frame depth `depth` using `lambda = depth * |m3|`.
    pub fn back_project_depth(&self, p: PixelPoint, depth: f64) -> Result<WorldPoint, GeometryError> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(GeometryError::InvalidDepth(depth));
        }
        let lambda = depth * self.m3_norm;
        Ok(WorldPoint::from_vector(self.center + self.ray(p) * lambda))
    }

    /// Depth of a world point along the principal axis.
    pub fn depth_of(&self, p: WorldPoint) -> f64 {
        let h = self.matrix * Vector4::new(p.x, p.y, p.z, 1.0);
        h.z / self.m3_norm
    }
}

/// Vertical half field of view that makes a camera at `altitude`, pitched
/// `pitch` below the horizon, cover `footprint` meters of road along its
/// viewing direction.
pub fn half_vfov_for_footprint(altitude: f64, pitch: f64, footprint: f64) -> Option<f64> {
    if !(altitude > 0.0 && footprint > 0.0 && pitch > 0.0 && pitch < PI / 2.0) {
        return None;
    }
    let covered = |a: f64| altitude / (pitch - a).tan() - altitude / (pitch + a).tan();
    // coverage grows without bound as the upper ray approaches the horizon
    let (mut lo, mut hi) = (0.0, pitch - 1e-12);
    if covered(hi) < footprint {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if covered(mid) < footprint {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Square-pixel pinhole intrinsics `(fx, fy, cx, cy)` for an image of the
/// given size whose vertical half field of view is `half_vfov`.
pub fn intrinsics_for_half_vfov(half_vfov: f64, width: u32, height: u32) -> (f64, f64, f64, f64) {
    let fy = f64::from(height) / 2.0 / half_vfov.tan();
    (fy, fy, f64::from(width) / 2.0, f64::from(height) / 2.0)
}
