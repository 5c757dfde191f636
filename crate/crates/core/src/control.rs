//! Lookahead target selection and the proportional heading controller with
//! output saturation and smoothing filter.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DbwCommand;
use crate::geometry::{wrap_angle, Pose2D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("a plan needs at least two waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoints {0} and {1} coincide")]
    CoincidentWaypoints(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPlan {
    pub waypoints: Vec<(f64, f64)>,
    pub interp_spacing: f64,
    pub lookahead_m: f64,
}

impl WaypointPlan {
    pub fn new(
        waypoints: Vec<(f64, f64)>,
        interp_spacing: f64,
        lookahead_m: f64,
    ) -> Result<Self, ControlError> {
        let plan = Self {
            waypoints,
            interp_spacing,
            lookahead_m,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if self.waypoints.len() < 2 {
            return Err(ControlError::TooFewWaypoints(self.waypoints.len()));
        }
        if self
            .waypoints
            .iter()
            .any(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(ControlError::InvalidParameter("waypoints must be finite"));
        }
        for (i, w) in self.waypoints.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(ControlError::CoincidentWaypoints(i, i + 1));
            }
        }
        if !(self.interp_spacing > 0.0 && self.interp_spacing.is_finite()) {
            return Err(ControlError::InvalidParameter("interp_spacing must be positive"));
        }
        if !(self.lookahead_m > 0.0 && self.lookahead_m.is_finite()) {
            return Err(ControlError::InvalidParameter("lookahead_m must be positive"));
        }
        Ok(())
    }

    /// Perpendicular distance from `(x, y)` to the waypoint polyline.
    pub fn cross_track(&self, x: f64, y: f64) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| point_segment_distance((x, y), w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let s = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    (p.0 - a.0 - s * dx).hypot(p.1 - a.1 - s * dy)
}

/// Subdivides every segment into `ceil(len / spacing)` equal pieces. The
/// result keeps all original waypoints in order and has no duplicates.
pub fn interpolate_path(plan: &WaypointPlan) -> Vec<(f64, f64)> {
    let mut out = vec![plan.waypoints[0]];
    for w in plan.waypoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let n = ((len / plan.interp_spacing).ceil() as usize).max(1);
        for k in 1..n {
            let s = k as f64 / n as f64;
            out.push((a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1)));
        }
        out.push(b);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerParams {
    pub kp: f64,
    pub u_max: f64,
    pub alpha: f64,
    pub v_cruise: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            kp: 1.0,
            u_max: 0.5,
            alpha: 0.2,
            v_cruise: 3.0,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.kp > 0.0) {
            return Err(ControlError::InvalidParameter("kp must be positive"));
        }
        if !(self.u_max > 0.0) {
            return Err(ControlError::InvalidParameter("u_max must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ControlError::InvalidParameter("alpha must lie in (0, 1]"));
        }
        if !(self.v_cruise > 0.0 && self.v_cruise.is_finite()) {
            return Err(ControlError::InvalidParameter("v_cruise must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    /// Previous filtered yaw-rate output.
    pub y_prev: f64,
    /// Path point closest to the vehicle, found by walking forward.
    pub progress_index: usize,
    pub target_index: usize,
    pub path_complete: bool,
}

/// Picks the first path point at least `lookahead_m` from the vehicle.
///
/// The search starts from the nearest point ahead of the last progress
/// index, so points the vehicle has already passed are never chosen. Both
/// indices only move forward. When no remaining point is far enough the
/// final point is returned and `path_complete` is set.
pub fn select_target(
    path: &[(f64, f64)],
    state: &ControllerState,
    pose: &Pose2D,
    lookahead_m: f64,
) -> ((f64, f64), ControllerState) {
    assert!(!path.is_empty(), "path must not be empty");
    let dist = |i: usize| pose.distance_to(path[i].0, path[i].1);
    let last = path.len() - 1;

    let mut progress = state.progress_index.min(last);
    while progress < last && dist(progress + 1) <= dist(progress) {
        progress += 1;
    }
    let mut target = state.target_index.max(progress).min(last);
    while target < last && dist(target) < lookahead_m {
        target += 1;
    }
    let complete = state.path_complete || (target == last && dist(last) < lookahead_m);
    (
        path[target],
        ControllerState {
            progress_index: progress,
            target_index: target,
            path_complete: complete,
            ..*state
        },
    )
}

/// Exponential smoothing `alpha * u_new + (1 - alpha) * y_prev`.
pub fn filter_step(y_prev: f64, u_new: f64, alpha: f64) -> f64 {
    alpha * u_new + (1.0 - alpha) * y_prev
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingOutput {
    pub command: DbwCommand,
    pub heading_error: f64,
    /// Set when the target coincided with the vehicle and the previous
    /// command was reissued.
    pub held: bool,
}

/// Proportional heading law, saturated, then smoothed.
pub fn heading_control(
    pose: &Pose2D,
    target: (f64, f64),
    params: &ControllerParams,
    cstate: &ControllerState,
) -> (HeadingOutput, ControllerState) {
    let (dx, dy) = (target.0 - pose.x, target.1 - pose.y);
    if dx.hypot(dy) < 1e-9 {
        return (
            HeadingOutput {
                command: DbwCommand::new(params.v_cruise, cstate.y_prev),
                heading_error: 0.0,
                held: true,
            },
            *cstate,
        );
    }
    let desired = dy.atan2(dx);
    let e = wrap_angle(desired - pose.psi);
    let u = (params.kp * e).clamp(-params.u_max, params.u_max);
    let y = filter_step(cstate.y_prev, u, params.alpha);
    (
        HeadingOutput {
            command: DbwCommand::new(params.v_cruise, y),
            heading_error: e,
            held: false,
        },
        ControllerState {
            y_prev: y,
            ..*cstate
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn plan(w: Vec<(f64, f64)>, spacing: f64) -> WaypointPlan {
        WaypointPlan::new(w, spacing, 10.0).unwrap()
    }

    #[test]
    fn uniform_subdivision() {
        let p = interpolate_path(&plan(vec![(0.0, 0.0), (10.0, 0.0)], 2.0));
        assert_eq!(
            p,
            vec![(0.0, 0.0), (2.0, 0.0), (4.0, 0.0), (6.0, 0.0), (8.0, 0.0), (10.0, 0.0)]
        );
        let short = interpolate_path(&plan(vec![(0.0, 0.0), (1.0, 1.0)], 5.0));
        assert_eq!(short, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    /// Independent check: walk the polyline by arc length and confirm each
    /// output point sits on it with non-decreasing arc length and gaps no
    /// larger than the spacing.
    fn arc_length_oracle(waypoints: &[(f64, f64)], points: &[(f64, f64)], spacing: f64) {
        let mut cum = vec![0.0];
        for w in waypoints.windows(2) {
            let l = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
            cum.push(cum.last().unwrap() + l);
        }
        let arc_of = |p: (f64, f64)| -> f64 {
            for (i, w) in waypoints.windows(2).enumerate() {
                let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
                let l = dx.hypot(dy);
                let s = ((p.0 - w[0].0) * dx + (p.1 - w[0].1) * dy) / l;
                let off = ((p.0 - w[0].0) * dy - (p.1 - w[0].1) * dx).abs() / l;
                if off < 1e-9 && s > -1e-9 && s < l + 1e-9 {
                    return cum[i] + s;
                }
            }
            panic!("point {p:?} is off the polyline");
        };
        let arcs: Vec<f64> = points.iter().map(|&p| arc_of(p)).collect();
        for a in arcs.windows(2) {
            assert!(a[1] > a[0] && a[1] - a[0] <= spacing + 1e-12);
        }
        for w in waypoints {
            assert!(points.contains(w));
        }
    }

    #[test]
    fn l_shaped_path_subdivides_per_segment() {
        let wps = vec![(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)];
        let p = interpolate_path(&plan(wps.clone(), 3.0));
        arc_length_oracle(&wps, &p, 3.0);
        // ceil(10 / 3) = 4 pieces of 2.5 m per leg
        let expected = vec![
            (0.0, 0.0), (2.5, 0.0), (5.0, 0.0), (7.5, 0.0), (10.0, 0.0),
            (10.0, 2.5), (10.0, 5.0), (10.0, 7.5), (10.0, 10.0),
        ];
        assert_eq!(p, expected);
    }

    #[test]
    fn plan_validation() {
        assert_eq!(
            WaypointPlan::new(vec![(0.0, 0.0)], 1.0, 10.0),
            Err(ControlError::TooFewWaypoints(1))
        );
        assert_eq!(
            WaypointPlan::new(vec![(0.0, 0.0), (0.0, 0.0)], 1.0, 10.0),
            Err(ControlError::CoincidentWaypoints(0, 1))
        );
        assert!(WaypointPlan::new(vec![(0.0, 0.0), (1.0, 0.0)], 0.0, 10.0).is_err());
        assert!(WaypointPlan::new(vec![(0.0, 0.0), (1.0, 0.0)], 1.0, -1.0).is_err());
    }

    fn brute_force_target(path: &[(f64, f64)], from: usize, pose: &Pose2D, la: f64) -> usize {
        (from..path.len())
            .find(|&i| (path[i].0 - pose.x).hypot(path[i].1 - pose.y) >= la)
            .unwrap_or(path.len() - 1)
    }

    #[test]
    fn lookahead_target_on_straight_path() {
        let path = interpolate_path(&plan(vec![(0.0, 0.0), (40.0, 0.0)], 2.0));
        let s0 = ControllerState::default();
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        let (t, s1) = select_target(&path, &s0, &pose, 10.0);
        assert_eq!(t, (10.0, 0.0));
        assert_eq!(s1.target_index, brute_force_target(&path, 0, &pose, 10.0));
        let pose = Pose2D::new(6.0, 0.0, 0.0);
        let (t, s2) = select_target(&path, &s1, &pose, 10.0);
        assert_eq!(t, (16.0, 0.0));
        assert_eq!(s2.target_index, brute_force_target(&path, 3, &pose, 10.0));
        assert!(!s2.path_complete);
    }

    #[test]
    fn past_the_end_returns_final_point() {
        let path = interpolate_path(&plan(vec![(0.0, 0.0), (20.0, 0.0)], 2.0));
        let (t, s) = select_target(&path, &ControllerState::default(), &Pose2D::new(25.0, 0.0, 0.0), 10.0);
        assert_eq!(t, (20.0, 0.0));
        assert!(s.path_complete);
    }

    #[test]
    fn late_first_fix_skips_points_behind() {
        let path = interpolate_path(&plan(vec![(0.0, 0.0), (100.0, 0.0)], 1.0));
        let (t, _) = select_target(&path, &ControllerState::default(), &Pose2D::new(35.2, 0.3, 0.0), 10.0);
        assert_eq!(t, (46.0, 0.0));
    }

    #[test]
    fn heading_law_examples() {
        let params = ControllerParams { kp: 1.0, u_max: 0.5, alpha: 1.0, v_cruise: 3.0 };
        let s = ControllerState::default();
        let (out, _) = heading_control(&Pose2D::new(0.0, 0.0, 0.0), (10.0, 0.0), &params, &s);
        assert_eq!(out.command.yaw_rate_cmd, 0.0);
        assert_eq!(out.heading_error, 0.0);

        let (out, next) = heading_control(&Pose2D::new(0.0, 0.0, 0.0), (0.0, 10.0), &params, &s);
        assert!((out.heading_error - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(out.command.yaw_rate_cmd, 0.5);
        assert_eq!(next.y_prev, 0.5);
        assert_eq!(out.command.v_cmd, 3.0);

        // heading 3.0, desired -3.0: turn 0.283 rad left rather than the long way
        let target = (10.0 * (-3.0f64).cos(), 10.0 * (-3.0f64).sin());
        let (out, _) = heading_control(&Pose2D::new(0.0, 0.0, 3.0), target, &params, &s);
        assert!((out.heading_error - (2.0 * PI - 6.0)).abs() < 1e-12);
        assert!((out.heading_error - 0.283_185_307_179_586).abs() < 1e-12);
    }

    #[test]
    fn coincident_target_reissues_previous_command() {
        let params = ControllerParams::default();
        let s = ControllerState { y_prev: 0.12, ..Default::default() };
        let (out, next) = heading_control(&Pose2D::new(1.0, 1.0, 0.0), (1.0, 1.0), &params, &s);
        assert!(out.held);
        assert_eq!(out.command.yaw_rate_cmd, 0.12);
        assert_eq!(next, s);
    }

    #[test]
    fn filter_examples() {
        assert_eq!(filter_step(0.7, 0.3, 1.0), 0.3);
        let mut y = 0.0;
        let expected = [0.2, 0.36, 0.488, 0.5904];
        for e in expected {
            y = filter_step(y, 1.0, 0.2);
            assert!((y - e).abs() < 1e-12);
        }
        let mut y = 0.4;
        for _ in 0..10 {
            y = filter_step(y, 0.4, 0.2);
        }
        assert!((y - 0.4).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn output_stays_saturated_and_error_wrapped(
            headings in prop::collection::vec(-10.0..10.0f64, 1..50),
            tx in -50.0..50.0f64, ty in -50.0..50.0f64,
            alpha in 0.01..1.0f64,
        ) {
            let params = ControllerParams { kp: 3.0, u_max: 0.5, alpha, v_cruise: 3.0 };
            let mut s = ControllerState::default();
            for psi in headings {
                let (out, next) = heading_control(&Pose2D::new(0.0, 0.0, psi), (tx, ty), &params, &s);
                prop_assert!(out.command.yaw_rate_cmd.abs() <= params.u_max + 1e-15);
                prop_assert!(out.heading_error.abs() <= PI);
                s = next;
            }
        }

        #[test]
        fn target_index_never_regresses(xs in prop::collection::vec(-5.0..60.0f64, 1..40)) {
            let path = interpolate_path(&WaypointPlan::new(
                vec![(0.0, 0.0), (20.0, 0.0), (30.0, 3.7), (50.0, 3.7)], 1.0, 10.0).unwrap());
            let mut s = ControllerState::default();
            for x in xs {
                let (_, next) = select_target(&path, &s, &Pose2D::new(x, 1.0, 0.0), 10.0);
                prop_assert!(next.target_index >= s.target_index);
                prop_assert!(next.progress_index >= s.progress_index);
                prop_assert!(next.target_index >= next.progress_index);
                s = next;
            }
        }
    }
}
