//! Synthetic overhead frames, background-subtraction detection and a gated
//! nearest-centroid tracker.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{PixelPoint, Pose2D, Projector, WorldPoint};

pub const BACKGROUND_INTENSITY: u8 = 40;
pub const VEHICLE_INTENSITY: u8 = 220;

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("frame size mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("failed to write frame: {0}")]
    Io(#[from] std::io::Error),
}

/// Grayscale image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    pub capture_time: f64,
}

impl Frame {
    pub fn filled(width: u32, height: u32, value: u8, capture_time: f64) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
            capture_time,
        }
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> u8 {
        self.pixels[v as usize * self.width as usize + u as usize]
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, value: u8) {
        self.pixels[v as usize * self.width as usize + u as usize] = value;
    }

    /// Binary PGM (P5).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<(), VisionError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_pgm())?;
        Ok(())
    }
}

/// Footprint of the vehicle on the road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleDims {
    pub length: f64,
    pub width: f64,
}

impl Default for VehicleDims {
    fn default() -> Self {
        Self {
            length: 4.9,
            width: 1.9,
        }
    }
}

/// Ground corners of the vehicle rectangle, counter-clockwise from rear-right.
pub fn vehicle_corners(pose: &Pose2D, dims: &VehicleDims) -> [WorldPoint; 4] {
    let (s, c) = pose.psi.sin_cos();
    let (hl, hw) = (dims.length / 2.0, dims.width / 2.0);
    [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)].map(|(dx, dy)| {
        WorldPoint::ground(pose.x + c * dx - s * dy, pose.y + s * dx + c * dy)
    })
}

/// Renders a flat background with the vehicle's ground rectangle painted in.
///
/// A pixel is painted when its center lies inside the projected quad. If any
/// corner is behind the camera the vehicle is at least several meters behind
/// the near edge of the view, so nothing is painted.
pub fn render_frame(camera: &Projector, vehicle: &Pose2D, dims: &VehicleDims, t: f64) -> Frame {
    let (width, height) = camera.image_size();
    let mut frame = Frame::filled(width, height, BACKGROUND_INTENSITY, t);
    let mut quad = [PixelPoint::new(0.0, 0.0); 4];
    for (q, corner) in quad.iter_mut().zip(vehicle_corners(vehicle, dims)) {
        match camera.project(corner) {
            Ok(px) => *q = px,
            Err(_) => return frame,
        }
    }
    fill_convex_quad(&mut frame, &quad, VEHICLE_INTENSITY);
    frame
}

fn fill_convex_quad(frame: &mut Frame, quad: &[PixelPoint; 4], value: u8) {
    let (w, h) = (f64::from(frame.width), f64::from(frame.height));
    let u_lo = quad.iter().map(|p| p.u).fold(f64::INFINITY, f64::min);
    let u_hi = quad.iter().map(|p| p.u).fold(f64::NEG_INFINITY, f64::max);
    let v_lo = quad.iter().map(|p| p.v).fold(f64::INFINITY, f64::min);
    let v_hi = quad.iter().map(|p| p.v).fold(f64::NEG_INFINITY, f64::max);
    if u_hi < 0.0 || v_hi < 0.0 || u_lo >= w || v_lo >= h {
        return;
    }
    let i0 = (u_lo - 0.5).ceil().max(0.0) as u32;
    let i1 = ((u_hi - 0.5).floor().min(w - 1.0)).max(-1.0);
    let j0 = (v_lo - 0.5).ceil().max(0.0) as u32;
    let j1 = ((v_hi - 0.5).floor().min(h - 1.0)).max(-1.0);
    if i1 < 0.0 || j1 < 0.0 {
        return;
    }
    let (i1, j1) = (i1 as u32, j1 as u32);
    let edge = |a: PixelPoint, b: PixelPoint, pu: f64, pv: f64| {
        (b.u - a.u) * (pv - a.v) - (b.v - a.v) * (pu - a.u)
    };
    for j in j0..=j1 {
        let pv = f64::from(j) + 0.5;
        for i in i0..=i1 {
            let pu = f64::from(i) + 0.5;
            let (mut pos, mut neg) = (false, false);
            for k in 0..4 {
                let e = edge(quad[k], quad[(k + 1) % 4], pu, pv);
                pos |= e > 0.0;
                neg |= e < 0.0;
            }
            if !(pos && neg) {
                frame.set(i, j, value);
            }
        }
    }
}

/// Adds zero-mean Gaussian noise with standard deviation `sigma` to every
/// pixel, saturating at the 8-bit range.
pub fn add_gaussian_noise<R: Rng + ?Sized>(frame: &mut Frame, sigma: f64, rng: &mut R) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    for p in frame.pixels.iter_mut() {
        let noisy = f64::from(*p) + normal.sample(rng);
        *p = noisy.round().clamp(0.0, 255.0) as u8;
    }
}

/// Inclusive pixel-index bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub u_min: u32,
    pub v_min: u32,
    pub u_max: u32,
    pub v_max: u32,
}

impl BoundingBox {
    pub fn center(&self) -> PixelPoint {
        PixelPoint::new(
            (f64::from(self.u_min) + f64::from(self.u_max) + 1.0) / 2.0,
            (f64::from(self.v_min) + f64::from(self.v_max) + 1.0) / 2.0,
        )
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        (self.u_min..=self.u_max).contains(&u) && (self.v_min..=self.v_max).contains(&v)
    }

    pub fn touches_border(&self, width: u32, height: u32) -> bool {
        self.u_min == 0 || self.v_min == 0 || self.u_max + 1 >= width || self.v_max + 1 >= height
    }
}

/// A 4-connected foreground region.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub bbox: BoundingBox,
    pub area: usize,
    /// Mean of the member pixel centers.
    pub centroid: PixelPoint,
}

/// Labels the 4-connected components of `|current - background| > threshold`
/// and returns those with at least `min_area` pixels, in raster order of
/// their first pixel.
pub fn foreground_components(
    background: &Frame,
    current: &Frame,
    threshold: u8,
    min_area: usize,
) -> Result<Vec<Component>, VisionError> {
    if background.width != current.width || background.height != current.height {
        return Err(VisionError::DimensionMismatch(
            background.width,
            background.height,
            current.width,
            current.height,
        ));
    }
    let (w, h) = (current.width as usize, current.height as usize);
    let mut mask: Vec<bool> = background
        .pixels
        .iter()
        .zip(&current.pixels)
        .map(|(&b, &c)| b.abs_diff(c) > threshold)
        .collect();

    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask[start] {
            continue;
        }
        mask[start] = false;
        stack.push(start);
        let (mut area, mut su, mut sv) = (0usize, 0.0, 0.0);
        let (mut u_min, mut v_min, mut u_max, mut v_max) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(idx) = stack.pop() {
            let (u, v) = (idx % w, idx / w);
            area += 1;
            su += u as f64 + 0.5;
            sv += v as f64 + 0.5;
            u_min = u_min.min(u);
            u_max = u_max.max(u);
            v_min = v_min.min(v);
            v_max = v_max.max(v);
            let mut visit = |n: usize| {
                if mask[n] {
                    mask[n] = false;
                    stack.push(n);
                }
            };
            if u > 0 {
                visit(idx - 1);
            }
            if u + 1 < w {
                visit(idx + 1);
            }
            if v > 0 {
                visit(idx - w);
            }
            if v + 1 < h {
                visit(idx + w);
            }
        }
        if area >= min_area {
            components.push(Component {
                bbox: BoundingBox {
                    u_min: u_min as u32,
                    v_min: v_min as u32,
                    u_max: u_max as u32,
                    v_max: v_max as u32,
                },
                area,
                centroid: PixelPoint::new(su / area as f64, sv / area as f64),
            });
        }
    }
    Ok(components)
}

/// Tight box of the largest foreground component, if any reaches `min_area`.
/// Ties go to the component found first in raster order.
pub fn detect_by_subtraction(
    background: &Frame,
    current: &Frame,
    threshold: u8,
    min_area: usize,
) -> Result<Option<BoundingBox>, VisionError> {
    let components = foreground_components(background, current, threshold, min_area)?;
    Ok(largest(&components).map(|c| c.bbox))
}

fn largest(components: &[Component]) -> Option<&Component> {
    components
        .iter()
        .fold(None, |best: Option<&Component>, c| match best {
            Some(b) if b.area >= c.area => Some(b),
            _ => Some(c),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub threshold: u8,
    pub min_area: usize,
    pub gate_px: f64,
    /// Consecutive misses tolerated before falling back to searching.
    pub max_lost: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            threshold: 30,
            min_area: 25,
            gate_px: 80.0,
            max_lost: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackerMode {
    Searching,
    Tracking,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub center: PixelPoint,
    pub capture_time: f64,
}

#[derive(Debug, Clone)]
pub struct TrackerState {
    pub mode: TrackerMode,
    pub last_box: Option<BoundingBox>,
    pub background: Option<Frame>,
    pub frames_lost: u32,
}

impl Default for TrackerState {
    fn default() -> Self {
        Self::new()
    }
}

impl TrackerState {
    pub fn new() -> Self {
        Self {
            mode: TrackerMode::Searching,
            last_box: None,
            background: None,
            frames_lost: 0,
        }
    }

    /// Advances the tracker by one frame.
    ///
    /// The first frame ever seen becomes the background. A frame whose size
    /// differs from the background replaces it and resets the tracker.
    pub fn step(&mut self, frame: &Frame, config: &TrackerConfig) -> Option<Detection> {
        let Some(background) = &self.background else {
            self.background = Some(frame.clone());
            return None;
        };
        let components =
            match foreground_components(background, frame, config.threshold, config.min_area) {
                Ok(c) => c,
                Err(_) => {
                    *self = Self::new();
                    self.background = Some(frame.clone());
                    return None;
                }
            };

        let accepted = match (self.mode, self.last_box) {
            (TrackerMode::Tracking, Some(last)) => {
                let anchor = last.center();
                components
                    .iter()
                    .map(|c| {
                        let d = (c.centroid.u - anchor.u).hypot(c.centroid.v - anchor.v);
                        (d, c)
                    })
                    .filter(|(d, _)| *d <= config.gate_px)
                    .fold(None, |best: Option<(f64, &Component)>, cand| match best {
                        Some(b) if b.0 <= cand.0 => Some(b),
                        _ => Some(cand),
                    })
                    .map(|(_, c)| c)
            }
            _ => largest(&components),
        };

        match accepted {
            Some(c) => {
                self.mode = TrackerMode::Tracking;
                self.last_box = Some(c.bbox);
                self.frames_lost = 0;
                Some(Detection {
                    bbox: c.bbox,
                    center: c.bbox.center(),
                    capture_time: frame.capture_time,
                })
            }
            None => {
                if self.mode == TrackerMode::Tracking {
                    self.frames_lost += 1;
                    if self.frames_lost > config.max_lost {
                        self.mode = TrackerMode::Searching;
                        self.last_box = None;
                        self.frames_lost = 0;
                    }
                }
                None
            }
        }
    }
}
