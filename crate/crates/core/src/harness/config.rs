//! Scenario files: one JSON document per scenario.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{ControllerParams, WaypointPlan};
use crate::dynamics::VehicleParams;
use crate::geometry::{CameraModel, Pose2D};
use crate::netbus::LinkConfig;
use crate::nodes::{CellLayout, Feedback, MsspConfig, VehicleConfig};
use crate::vision::{TrackerConfig, VehicleDims};

use super::HarnessError;

pub const BUNDLED: [(&str, &str); 3] = [
    ("straight_3ms", include_str!("../../scenarios/straight_3ms.json")),
    ("straight_6ms", include_str!("../../scenarios/straight_6ms.json")),
    ("baseline_truth_3ms", include_str!("../../scenarios/baseline_truth_3ms.json")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Lockstep,
    Distributed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub id: u32,
    #[serde(flatten)]
    pub model: CameraModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerGains {
    pub kp: f64,
    pub u_max: f64,
    pub alpha: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        let d = ControllerParams::default();
        Self {
            kp: d.kp,
            u_max: d.u_max,
            alpha: d.alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleSetup {
    pub length: f64,
    pub width: f64,
    pub tau_v: f64,
    pub tau_omega: f64,
    pub max_yaw_rate: f64,
    pub initial: Pose2D,
    /// Defaults to the cruise speed.
    pub initial_speed: Option<f64>,
}

impl Default for VehicleSetup {
    fn default() -> Self {
        let dims = VehicleDims::default();
        let p = VehicleParams::default();
        Self {
            length: dims.length,
            width: dims.width,
            tau_v: p.tau_v,
            tau_omega: p.tau_omega,
            max_yaw_rate: p.max_yaw_rate,
            initial: Pose2D::new(0.0, 0.0, 0.0),
            initial_speed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisionSetup {
    pub frame_rate: f64,
    pub threshold: u8,
    pub min_area: usize,
    pub gate_px: f64,
    pub max_lost: u32,
    pub noise_sigma: f64,
}

impl Default for VisionSetup {
    fn default() -> Self {
        let t = TrackerConfig::default();
        Self {
            frame_rate: 20.0,
            threshold: t.threshold,
            min_area: t.min_area,
            gate_px: t.gate_px,
            max_lost: t.max_lost,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timing {
    pub control_dt: f64,
    pub staleness_timeout: f64,
    pub stop_grace: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            control_dt: 0.02,
            staleness_timeout: 0.25,
            stop_grace: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSetup {
    pub host: String,
    /// Vehicle listens here; roadside unit `i` on `base_port + i`.
    pub base_port: u16,
}

impl Default for NetworkSetup {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            base_port: 47800,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogPaths {
    pub out_dir: String,
    pub runlog: String,
    pub summary: String,
    pub net_metrics: String,
}

impl Default for LogPaths {
    fn default() -> Self {
        Self {
            out_dir: "out".into(),
            runlog: "runlog.csv".into(),
            summary: "summary.json".into(),
            net_metrics: "net_metrics.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub cameras: Vec<CameraConfig>,
    /// Expected distance between consecutive cameras along the road.
    pub camera_spacing: f64,
    pub waypoints: Vec<(f64, f64)>,
    #[serde(default = "default_interp_spacing")]
    pub interp_spacing: f64,
    #[serde(default = "default_lookahead")]
    pub lookahead_m: f64,
    pub v_cruise: f64,
    #[serde(default)]
    pub controller: ControllerGains,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub mode: Mode,
    /// Seeds the network generator and pixel noise.
    #[serde(default)]
    pub seed: u64,
    pub duration_cap: f64,
    #[serde(default)]
    pub log_paths: LogPaths,
    #[serde(default)]
    pub feedback: Feedback,
    #[serde(default)]
    pub vehicle: VehicleSetup,
    #[serde(default)]
    pub vision: VisionSetup,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub network: NetworkSetup,
}

fn default_interp_spacing() -> f64 {
    1.0
}

fn default_lookahead() -> f64 {
    10.0
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| HarnessError::Validation(format!("scenario: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a scenario file, or a bundled scenario by name.
    pub fn load(source: &str) -> Result<Self, HarnessError> {
        let path = Path::new(source);
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            return Self::from_json(&text);
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(source);
        match BUNDLED.iter().find(|(name, _)| *name == stem) {
            Some((_, text)) => Self::from_json(text),
            None => Err(HarnessError::Validation(format!(
                "no scenario file or bundled scenario named {source:?}"
            ))),
        }
    }

    pub fn bundled(name: &str) -> Result<Self, HarnessError> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_json(text))
            .unwrap_or_else(|| Err(HarnessError::Validation(format!("unknown scenario {name}"))))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Validation(m));
        if self.cameras.is_empty() {
            return bad("at least one camera is required".into());
        }
        for c in &self.cameras {
            if c.id == 0 {
                return bad("camera ids start at 1".into());
            }
            c.model
                .validate()
                .map_err(|e| HarnessError::Validation(format!("camera {}: {e}", c.id)))?;
        }
        let mut ids: Vec<u32> = self.cameras.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.cameras.len() {
            return bad("camera ids must be distinct".into());
        }
        if !(self.duration_cap > 0.0 && self.duration_cap.is_finite()) {
            return bad("duration_cap must be positive".into());
        }
        if !(self.camera_spacing > 0.0) {
            return bad("camera_spacing must be positive".into());
        }
        for w in self.cameras.windows(2) {
            let d = w[1].model.position.x - w[0].model.position.x;
            if (d - self.camera_spacing).abs() > 1e-6 {
                return bad(format!(
                    "cameras {} and {} are {d} m apart, camera_spacing says {}",
                    w[0].id, w[1].id, self.camera_spacing
                ));
            }
        }
        self.plan()
            .validate()
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
        self.controller_params()
            .validate()
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
        self.link.validate().map_err(HarnessError::Validation)?;
        if !(self.vision.frame_rate > 0.0) {
            return bad("vision.frame_rate must be positive".into());
        }
        let t = &self.timing;
        if !(t.control_dt > 0.0 && t.control_dt <= crate::dynamics::MAX_DT) {
            return bad("timing.control_dt must lie in (0, 0.1]".into());
        }
        if !(t.staleness_timeout > 0.0 && t.stop_grace > 0.0) {
            return bad("timing values must be positive".into());
        }
        if self.mode == Mode::Distributed {
            let top = u32::from(self.network.base_port) + ids.last().copied().unwrap_or(0);
            if top > u32::from(u16::MAX) {
                return bad("port range overflows".into());
            }
        }
        let cams: Vec<_> = self.cameras.iter().map(|c| (c.id, c.model.clone())).collect();
        CellLayout::from_cameras(&cams)
            .and_then(|l| l.validate())
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
        Ok(())
    }

    pub fn plan(&self) -> WaypointPlan {
        WaypointPlan {
            waypoints: self.waypoints.clone(),
            interp_spacing: self.interp_spacing,
            lookahead_m: self.lookahead_m,
        }
    }

    pub fn controller_params(&self) -> ControllerParams {
        ControllerParams {
            kp: self.controller.kp,
            u_max: self.controller.u_max,
            alpha: self.controller.alpha,
            v_cruise: self.v_cruise,
        }
    }

    pub fn mssp_ids(&self) -> Vec<u32> {
        self.cameras.iter().map(|c| c.id).collect()
    }

    pub fn dims(&self) -> VehicleDims {
        VehicleDims {
            length: self.vehicle.length,
            width: self.vehicle.width,
        }
    }

    pub fn cell_layout(&self) -> CellLayout {
        let cams: Vec<_> = self.cameras.iter().map(|c| (c.id, c.model.clone())).collect();
        CellLayout::from_cameras(&cams).expect("validated scenario")
    }

    pub fn vehicle_config(&self) -> VehicleConfig {
        VehicleConfig {
            plan: self.plan(),
            controller: self.controller_params(),
            params: VehicleParams {
                tau_v: self.vehicle.tau_v,
                tau_omega: self.vehicle.tau_omega,
                max_yaw_rate: self.vehicle.max_yaw_rate,
            },
            dt: self.timing.control_dt,
            initial_pose: self.vehicle.initial,
            initial_speed: self.vehicle.initial_speed.unwrap_or(self.v_cruise),
            staleness_timeout: self.timing.staleness_timeout,
            stop_grace: self.timing.stop_grace,
            feedback: self.feedback,
            mssp_ids: self.mssp_ids(),
        }
    }

    pub fn mssp_config(&self, camera: &CameraConfig, dump_dir: Option<&Path>) -> MsspConfig {
        MsspConfig {
            id: camera.id,
            camera: camera.model.clone(),
            dims: self.dims(),
            tracker: TrackerConfig {
                threshold: self.vision.threshold,
                min_area: self.vision.min_area,
                gate_px: self.vision.gate_px,
                max_lost: self.vision.max_lost,
            },
            noise_sigma: self.vision.noise_sigma,
            noise_seed: self
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(u64::from(camera.id)),
            dump_dir: dump_dir.map(Path::to_path_buf),
        }
    }

    /// Network generator settings; the scenario seed is the single seed.
    pub fn link_config(&self) -> LinkConfig {
        LinkConfig {
            seed: self.seed,
            ..self.link
        }
    }
}
