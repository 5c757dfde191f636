//! Roadside camera node and vehicle node.
//!
//! Both are plain state machines advanced by `step(now, inbox)`; the
//! `*_tick` helpers wire them to any [`Transport`], which is how the same
//! logic runs under the lockstep scheduler and over real sockets.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{
    heading_control, interpolate_path, select_target, ControlError, ControllerParams,
    ControllerState, WaypointPlan,
};
use crate::dynamics::{self, DbwCommand, DynamicsError, VehicleParams, VehicleState};
use crate::fusion::{FusedFix, FusionState, PositionEstimate};
use crate::geometry::{CameraModel, GeometryError, Pose2D, Projector};
use crate::netbus::{EstimateMsg, NetError, NodeId, PoseMsg, Transport, WireMessage};
use crate::vision::{
    add_gaussian_noise, render_frame, Detection, Frame, TrackerConfig, TrackerState, VehicleDims,
    BACKGROUND_INTENSITY,
};

#[derive(Debug, Error)]
pub enum NodeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("cell layout: {0}")]
    Layout(String),
}

#[derive(Debug, Clone)]
pub struct MsspConfig {
    pub id: u32,
    pub camera: CameraModel,
    pub dims: VehicleDims,
    pub tracker: TrackerConfig,
    pub noise_sigma: f64,
    pub noise_seed: u64,
    /// When set, every frame is written as `mssp<id>_f<seq>.pgm` here.
    pub dump_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsspStats {
    pub frames: u64,
    pub detections: u64,
    /// Detections not published because the box touched the image border.
    pub clipped: u64,
    pub published: u64,
}

pub struct MsspNode {
    pub id: u32,
    name: String,
    projector: Projector,
    config: MsspConfig,
    pub tracker: TrackerState,
    pub last_pose: Option<PoseMsg>,
    rng: ChaCha8Rng,
    frame_seq: u64,
    est_seq: u64,
    pub stats: MsspStats,
}

impl MsspNode {
    pub fn new(config: MsspConfig) -> Result<Self, NodeError> {
        let projector = config.camera.projector()?;
        Ok(Self {
            id: config.id,
            name: NodeId::Mssp(config.id).to_string(),
            projector,
            rng: ChaCha8Rng::seed_from_u64(config.noise_seed),
            config,
            tracker: TrackerState::new(),
            last_pose: None,
            frame_seq: 0,
            est_seq: 0,
            stats: MsspStats::default(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Renders the scene the camera would see right now.
    pub fn capture(&mut self, now: f64) -> Frame {
        let mut frame = match &self.last_pose {
            Some(p) => render_frame(
                &self.projector,
                &Pose2D::new(p.x, p.y, p.psi),
                &self.config.dims,
                now,
            ),
            None => {
                let (w, h) = self.projector.image_size();
                Frame::filled(w, h, BACKGROUND_INTENSITY, now)
            }
        };
        add_gaussian_noise(&mut frame, self.config.noise_sigma, &mut self.rng);
        frame
    }

    /// One camera frame: adopt the newest pose, render, track, and publish
    /// a ground-plane estimate if the tracker holds an unclipped target.
    pub fn step(&mut self, now: f64, poses: &[PoseMsg]) -> Vec<EstimateMsg> {
        for p in poses {
            if self.last_pose.as_ref().is_none_or(|held| p.seq > held.seq) {
                self.last_pose = Some(p.clone());
            }
        }
        let frame = self.capture(now);
        self.frame_seq += 1;
        self.stats.frames += 1;
        if let Some(dir) = &self.config.dump_dir {
            let path = dir.join(format!("mssp{}_f{}.pgm", self.id, self.frame_seq));
            if let Err(e) = frame.write_pgm(&path) {
                log::warn!("{}: frame dump failed: {e}", self.name);
            }
        }
        let Some(det) = self.tracker.step(&frame, &self.config.tracker) else {
            return Vec::new();
        };
        self.stats.detections += 1;
        match self.estimate(&det) {
            Some(est) => {
                self.stats.published += 1;
                vec![est]
            }
            None => Vec::new(),
        }
    }

    fn estimate(&mut self, det: &Detection) -> Option<EstimateMsg> {
        let (w, h) = self.projector.image_size();
        if det.bbox.touches_border(w, h) {
            self.stats.clipped += 1;
            return None;
        }
        let ground = self.projector.back_project_ground(det.center).ok()?;
        self.est_seq += 1;
        Some(EstimateMsg {
            sender: self.name.clone(),
            seq: self.est_seq,
            t: det.capture_time,
            mssp_id: self.name.clone(),
            x: ground.x,
            y: ground.y,
            t_capture: det.capture_time,
        })
    }
}

/// Drains pose broadcasts, runs one frame and sends estimates to the vehicle.
pub fn mssp_tick<T: Transport + ?Sized>(
    node: &mut MsspNode,
    now: f64,
    transport: &mut T,
) -> Result<Vec<EstimateMsg>, NetError> {
    let poses: Vec<PoseMsg> = transport
        .drain()
        .into_iter()
        .filter_map(|r| match r.msg {
            WireMessage::Pose(p) => Some(p),
            WireMessage::Estimate(_) => None,
        })
        .collect();
    let out = node.step(now, &poses);
    for est in &out {
        transport.send(NodeId::Vehicle, &WireMessage::Estimate(est.clone()))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    WaitingForFirstFix,
    Driving,
    Stopped,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::WaitingForFirstFix => "waiting",
            Phase::Driving => "driving",
            Phase::Stopped => "stopped",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "waiting" => Some(Phase::WaitingForFirstFix),
            "driving" => Some(Phase::Driving),
            "stopped" => Some(Phase::Stopped),
            _ => None,
        }
    }
}

/// Where the vehicle's position feedback comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    /// Fused roadside camera estimates.
    #[default]
    Cameras,
    /// Perfect position from the simulated vehicle, for baseline runs.
    Truth,
}

/// Waypoint-following decision logic.
///
/// It sees a position fix and a heading, never the simulated vehicle
/// itself, so in camera mode control depends only on roadside estimates.
#[derive(Debug, Clone)]
pub struct Autopilot {
    plan: WaypointPlan,
    path: Vec<(f64, f64)>,
    params: ControllerParams,
    pub cstate: ControllerState,
    pub phase: Phase,
    last_cmd: DbwCommand,
    last_fix_t: Option<f64>,
    last_cell_seen: bool,
    stop_grace: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutopilotOutput {
    pub command: DbwCommand,
    pub target: Option<(f64, f64)>,
    pub phase: Phase,
}

impl Autopilot {
    pub fn new(plan: WaypointPlan, params: ControllerParams, stop_grace: f64) -> Result<Self, NodeError> {
        plan.validate()?;
        params.validate()?;
        Ok(Self {
            path: interpolate_path(&plan),
            plan,
            params,
            cstate: ControllerState::default(),
            phase: Phase::WaitingForFirstFix,
            last_cmd: DbwCommand::new(params.v_cruise, 0.0),
            last_fix_t: None,
            last_cell_seen: false,
            stop_grace,
        })
    }

    pub fn plan(&self) -> &WaypointPlan {
        &self.plan
    }

    fn passed_end(&self, x: f64, y: f64) -> bool {
        let n = self.plan.waypoints.len();
        let (a, b) = (self.plan.waypoints[n - 2], self.plan.waypoints[n - 1]);
        (x - b.0) * (b.0 - a.0) + (y - b.1) * (b.1 - a.1) > 0.0
    }

    /// `from_last_cell` tells whether the fix includes the final roadside
    /// unit along the route.
    pub fn step(
        &mut self,
        now: f64,
        fix: Option<FusedFix>,
        from_last_cell: bool,
        heading: f64,
    ) -> AutopilotOutput {
        if self.phase == Phase::WaitingForFirstFix && fix.is_some() {
            self.phase = Phase::Driving;
        }
        let mut target = None;
        match self.phase {
            Phase::WaitingForFirstFix => {
                self.last_cmd = DbwCommand::new(self.params.v_cruise, 0.0);
            }
            Phase::Driving => {
                if let Some(f) = fix {
                    self.last_fix_t = Some(now);
                    self.last_cell_seen |= from_last_cell;
                    if self.passed_end(f.x, f.y) {
                        self.phase = Phase::Stopped;
                    } else {
                        let pose = Pose2D::new(f.x, f.y, heading);
                        let (tgt, cs) =
                            select_target(&self.path, &self.cstate, &pose, self.plan.lookahead_m);
                        let (out, cs) = heading_control(&pose, tgt, &self.params, &cs);
                        self.cstate = cs;
                        self.last_cmd = out.command;
                        target = Some(tgt);
                    }
                } else if self.last_cell_seen
                    && self.last_fix_t.is_some_and(|t| now - t > self.stop_grace)
                {
                    self.phase = Phase::Stopped;
                }
            }
            Phase::Stopped => {}
        }
        if self.phase == Phase::Stopped {
            self.last_cmd = DbwCommand::STOP;
        }
        AutopilotOutput {
            command: self.last_cmd,
            target,
            phase: self.phase,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VehicleConfig {
    pub plan: WaypointPlan,
    pub controller: ControllerParams,
    pub params: VehicleParams,
    pub dt: f64,
    pub initial_pose: Pose2D,
    pub initial_speed: f64,
    pub staleness_timeout: f64,
    pub stop_grace: f64,
    pub feedback: Feedback,
    /// Roadside units in route order.
    pub mssp_ids: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct VehicleStepOutput {
    /// Truth at `now`, before this step's command is applied.
    pub pose: PoseMsg,
    pub state: VehicleState,
    pub fix: Option<FusedFix>,
    /// Estimates accepted during this step.
    pub fresh: Vec<PositionEstimate>,
    pub command: DbwCommand,
    pub phase: Phase,
}

pub struct VehicleNode {
    plant: VehicleState,
    params: VehicleParams,
    dt: f64,
    feedback: Feedback,
    last_mssp: Option<String>,
    pub autopilot: Autopilot,
    pub fusion: FusionState,
    pose_seq: u64,
}

impl VehicleNode {
    pub fn new(config: VehicleConfig) -> Result<Self, NodeError> {
        if !(config.dt > 0.0 && config.dt <= dynamics::MAX_DT) {
            return Err(DynamicsError::InvalidStep(config.dt).into());
        }
        let mut plant = VehicleState::at_rest(config.initial_pose);
        plant.v = config.initial_speed.max(0.0);
        Ok(Self {
            plant,
            params: config.params,
            dt: config.dt,
            feedback: config.feedback,
            last_mssp: config
                .mssp_ids
                .last()
                .map(|&i| NodeId::Mssp(i).to_string()),
            autopilot: Autopilot::new(config.plan, config.controller, config.stop_grace)?,
            fusion: FusionState::new(config.staleness_timeout),
            pose_seq: 0,
        })
    }

    pub fn state(&self) -> &VehicleState {
        &self.plant
    }

    pub fn phase(&self) -> Phase {
        self.autopilot.phase
    }

    pub fn step(&mut self, now: f64, inbox: &[PositionEstimate]) -> Result<VehicleStepOutput, NodeError> {
        self.pose_seq += 1;
        let truth = self.plant;
        let pose = PoseMsg {
            sender: NodeId::Vehicle.to_string(),
            seq: self.pose_seq,
            t: now,
            x: truth.pose.x,
            y: truth.pose.y,
            psi: truth.pose.psi,
            v: truth.v,
        };

        let fresh: Vec<PositionEstimate> = inbox
            .iter()
            .filter(|e| self.fusion.ingest((*e).clone()))
            .cloned()
            .collect();
        let (fix, from_last) = match self.feedback {
            Feedback::Cameras => {
                let fix = self.fusion.fuse(now);
                let from_last = self
                    .last_mssp
                    .as_deref()
                    .is_some_and(|id| self.fusion.latest(id).is_some());
                (fix, from_last)
            }
            Feedback::Truth => (
                Some(FusedFix {
                    x: truth.pose.x,
                    y: truth.pose.y,
                    t: now,
                    sources: 1,
                }),
                false,
            ),
        };
        let out = self.autopilot.step(now, fix, from_last, truth.pose.psi);
        self.plant = dynamics::step(&self.plant, &out.command, &self.params, self.dt)?;
        Ok(VehicleStepOutput {
            pose,
            state: truth,
            fix,
            fresh,
            command: out.command,
            phase: out.phase,
        })
    }
}

/// Drains estimates, runs one control step and broadcasts the true pose to
/// every roadside unit.
pub fn vehicle_tick<T: Transport + ?Sized>(
    node: &mut VehicleNode,
    now: f64,
    mssps: &[u32],
    transport: &mut T,
) -> Result<VehicleStepOutput, NodeError> {
    let inbox: Vec<PositionEstimate> = transport
        .drain()
        .into_iter()
        .filter_map(|r| match r.msg {
            WireMessage::Estimate(e) => Some(PositionEstimate {
                mssp_id: e.mssp_id,
                x: e.x,
                y: e.y,
                t_capture: e.t_capture,
                t_received: r.t_received,
                seq: e.seq,
            }),
            WireMessage::Pose(_) => None,
        })
        .collect();
    let out = node.step(now, &inbox)?;
    let msg = WireMessage::Pose(out.pose.clone());
    for &id in mssps {
        transport.send(NodeId::Mssp(id), &msg)?;
    }
    Ok(out)
}

/// Ground interval along the road seen by each camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLayout {
    /// `(mssp id, x_near, x_far)`, sorted by `x_near`.
    pub cells: Vec<(u32, f64, f64)>,
}

impl CellLayout {
    /// Uses each camera's center image column. Assumes cameras look along
    /// the road (`+x`).
    pub fn from_cameras(cameras: &[(u32, CameraModel)]) -> Result<Self, NodeError> {
        let mut cells = Vec::new();
        for (id, cam) in cameras {
            let (near, far) = cam
                .footprint_x()?
                .ok_or_else(|| NodeError::Layout(format!("camera {id} sees the horizon")))?;
            cells.push((*id, near, far));
        }
        cells.sort_by(|a, b| a.1.total_cmp(&b.1));
        Ok(Self { cells })
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        for w in self.cells.windows(2) {
            let overlap = w[0].2 - w[1].1;
            if overlap <= 0.0 {
                return Err(NodeError::Layout(format!(
                    "cells of mssp{} and mssp{} do not overlap",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(())
    }

    pub fn overlaps(&self) -> Vec<f64> {
        self.cells.windows(2).map(|w| w[0].2 - w[1].1).collect()
    }

    pub fn cells_containing(&self, x: f64) -> Vec<u32> {
        self.cells
            .iter()
            .filter(|c| x >= c.1 && x <= c.2)
            .map(|c| c.0)
            .collect()
    }
}
