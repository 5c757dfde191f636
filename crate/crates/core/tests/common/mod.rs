//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use iea_sim::geometry::CameraModel;

/// Closed-form pinhole projection for a camera with roll = yaw = 0,
/// written from the camera axes directly rather than through matrices.
pub fn oracle_project(cam: &CameraModel, x: f64, y: f64) -> (f64, f64) {
    assert!(cam.roll == 0.0 && cam.yaw == 0.0);
    let (dx, dy, h) = (x - cam.position.x, y - cam.position.y, cam.position.z);
    let (s, c) = cam.pitch.sin_cos();
    let depth = dx * c + h * s;
    let right = -dy;
    let down = h * c - dx * s;
    (cam.fx * right / depth + cam.cx, cam.fy * down / depth + cam.cy)
}

pub fn corners(x: f64, y: f64, psi: f64, length: f64, width: f64) -> [(f64, f64); 4] {
    let (s, c) = psi.sin_cos();
    let (a, b) = (length / 2.0, width / 2.0);
    [(a, b), (a, -b), (-a, -b), (-a, b)].map(|(l, w)| (x + l * c - w * s, y + l * s + w * c))
}

pub fn projected_corners(cam: &CameraModel, x: f64, y: f64, psi: f64, length: f64, width: f64) -> [(f64, f64); 4] {
    corners(x, y, psi, length, width).map(|(px, py)| oracle_project(cam, px, py))
}

/// Center of the axis-aligned extent of a point set.
pub fn extent_center(pts: &[(f64, f64)]) -> (f64, f64) {
    let (mut u0, mut u1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(u, v) in pts {
        u0 = u0.min(u);
        u1 = u1.max(u);
        v0 = v0.min(v);
        v1 = v1.max(v);
    }
    ((u0 + u1) / 2.0, (v0 + v1) / 2.0)
}

/// Area centroid of a simple polygon (shoelace).
pub fn polygon_centroid(pts: &[(f64, f64)]) -> (f64, f64) {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..pts.len() {
        let (p, q) = (pts[i], pts[(i + 1) % pts.len()]);
        let cross = p.0 * q.1 - q.0 * p.1;
        a += cross;
        cx += (p.0 + q.0) * cross;
        cy += (p.1 + q.1) * cross;
    }
    (cx / (3.0 * a), cy / (3.0 * a))
}

/// True when every corner lands at least `margin` pixels inside the image.
pub fn fully_in_view(cam: &CameraModel, x: f64, y: f64, psi: f64, length: f64, width: f64, margin: f64) -> bool {
    projected_corners(cam, x, y, psi, length, width).iter().all(|&(u, v)| {
        u >= margin && v >= margin && u <= f64::from(cam.width) - margin && v <= f64::from(cam.height) - margin
    }) && corners(x, y, psi, length, width)
        .iter()
        .all(|&(px, _)| px > cam.position.x)
}
