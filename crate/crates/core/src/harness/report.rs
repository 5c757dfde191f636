//! Depth-based versus ground-plane back-projection.
//!
//! With the depth fixed at the camera altitude, back-projection puts every
//! pixel on a sphere of that radius around the camera instead of on the
//! road. This report measures how far apart the two answers are.

use serde::{Deserialize, Serialize};

use crate::geometry::{CameraModel, GeometryError, PixelPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub depth: f64,
    pub samples: usize,
    /// Horizontal (x, y) distance between the two points.
    pub max_horizontal: f64,
    pub mean_horizontal: f64,
    pub max_3d: f64,
    pub mean_3d: f64,
    pub on_axis_horizontal: f64,
    pub on_axis_3d: f64,
}

/// Samples pixel centers every `step` pixels. Pixels whose ray misses the
/// ground are skipped.
pub fn depth_report(camera: &CameraModel, step: u32) -> Result<DepthReport, GeometryError> {
    let proj = camera.projector()?;
    let depth = camera.position.z;
    let pair = |p: PixelPoint| -> Option<(f64, f64)> {
        let g = proj.back_project_ground(p).ok()?;
        let d = proj.back_project_depth(p, depth).ok()?;
        Some(((g.x - d.x).hypot(g.y - d.y), g.distance(&d)))
    };
    let (mut n, mut max_h, mut sum_h, mut max_3, mut sum_3) = (0usize, 0.0f64, 0.0, 0.0f64, 0.0);
    let step = step.max(1);
    for j in (0..camera.height).step_by(step as usize) {
        for i in (0..camera.width).step_by(step as usize) {
            if let Some((h, d3)) = pair(PixelPoint::new(f64::from(i) + 0.5, f64::from(j) + 0.5)) {
                n += 1;
                max_h = max_h.max(h);
                sum_h += h;
                max_3 = max_3.max(d3);
                sum_3 += d3;
            }
        }
    }
    let (on_h, on_3) = pair(PixelPoint::new(camera.cx, camera.cy)).ok_or(GeometryError::NoIntersection)?;
    Ok(DepthReport {
        depth,
        samples: n,
        max_horizontal: max_h,
        mean_horizontal: if n > 0 { sum_h / n as f64 } else { 0.0 },
        max_3d: max_3,
        mean_3d: if n > 0 { sum_3 / n as f64 } else { 0.0 },
        on_axis_horizontal: on_h,
        on_axis_3d: on_3,
    })
}
