//! Planar kinematic vehicle with a drive-by-wire speed / yaw-rate interface.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Pose2D};

pub const MAX_DT: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("time step {0} outside (0, {MAX_DT}]")]
    InvalidStep(f64),
    #[error("command is not finite")]
    NonFiniteCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub pose: Pose2D,
    /// Forward speed, never negative.
    pub v: f64,
    pub yaw_rate: f64,
    pub t: f64,
}

impl VehicleState {
    pub fn at_rest(pose: Pose2D) -> Self {
        Self {
            pose,
            v: 0.0,
            yaw_rate: 0.0,
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbwCommand {
    pub v_cmd: f64,
    pub yaw_rate_cmd: f64,
}

impl DbwCommand {
    pub const STOP: DbwCommand = DbwCommand {
        v_cmd: 0.0,
        yaw_rate_cmd: 0.0,
    };

    pub fn new(v_cmd: f64, yaw_rate_cmd: f64) -> Self {
        Self { v_cmd, yaw_rate_cmd }
    }
}

/// Actuator lag time constants and the yaw-rate saturation the drive-by-wire
/// layer enforces. A zero time constant disables lag on that channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub tau_v: f64,
    pub tau_omega: f64,
    pub max_yaw_rate: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            tau_v: 0.5,
            tau_omega: 0.2,
            max_yaw_rate: 1.0,
        }
    }
}

impl VehicleParams {
    pub fn without_lag() -> Self {
        Self {
            tau_v: 0.0,
            tau_omega: 0.0,
            ..Self::default()
        }
    }
}

fn lag(current: f64, target: f64, dt: f64, tau: f64) -> f64 {
    if tau <= dt {
        target
    } else {
        current + (target - current) * dt / tau
    }
}

/// Advances the vehicle by `dt`.
///
/// Both channels first pass through a first-order lag; the pose then moves
/// along the exact circular arc for the updated speed and yaw rate.
pub fn step(
    state: &VehicleState,
    cmd: &DbwCommand,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState, DynamicsError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    if !(cmd.v_cmd.is_finite() && cmd.yaw_rate_cmd.is_finite()) {
        return Err(DynamicsError::NonFiniteCommand);
    }
    let v_cmd = cmd.v_cmd.max(0.0);
    let w_cmd = cmd
        .yaw_rate_cmd
        .clamp(-params.max_yaw_rate, params.max_yaw_rate);
    let v = lag(state.v, v_cmd, dt, params.tau_v).max(0.0);
    let w = lag(state.yaw_rate, w_cmd, dt, params.tau_omega);

    let Pose2D { x, y, psi } = state.pose;
    // chord of the arc, taken along the mid-step heading
    let h = 0.5 * w * dt;
    let sinc = if h.abs() < 1e-8 { 1.0 - h * h / 6.0 } else { h.sin() / h };
    let chord = v * dt * sinc;
    let (x, y) = (x + chord * (psi + h).cos(), y + chord * (psi + h).sin());
    Ok(VehicleState {
        pose: Pose2D {
            x,
            y,
            psi: wrap_angle(psi + w * dt),
        },
        v,
        yaw_rate: w,
        t: state.t + dt,
    })
}
