//! Run statistics derived from a [`RunLog`] alone.
//!
//! `scripts/summarize_runlog.py` recomputes the log-derived fields from the
//! CSV; both must agree, so nothing here may use state outside the log.

use serde::{Deserialize, Serialize};

use crate::control::WaypointPlan;
use crate::netbus::{LatencyStats, LinkRate, NetMetrics};
use crate::nodes::Phase;

use super::RunLog;

/// Cross-track statistics start this long after the first fix and end
/// when the vehicle stops.
pub const SETTLE_TIME: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateError {
    pub mssp: String,
    pub count: usize,
    pub mean: f64,
    pub rms: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub packets: usize,
    pub dropped: u64,
    /// Whole-run average rates per link.
    pub links: Vec<LinkRate>,
    pub latency: Option<LatencyStats>,
}

impl NetworkSummary {
    pub fn from_metrics(m: &NetMetrics, duration: f64) -> Self {
        let window = if duration > 0.0 { duration } else { 1.0 };
        let report = m.window_report(window, window);
        Self {
            packets: m.total_packets(),
            dropped: m.dropped,
            links: report.links,
            latency: report.latency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: usize,
    pub duration: f64,
    pub first_fix_t: Option<f64>,
    pub stopped_t: Option<f64>,
    pub final_x: f64,
    pub final_y: f64,
    pub cross_track_rms: Option<f64>,
    pub cross_track_max: Option<f64>,
    pub estimate_errors: Vec<EstimateError>,
    /// Peak excursion past the final lane, away from the side the vehicle
    /// came from.
    pub overshoot: Option<f64>,
    pub fused_jump_max: Option<f64>,
    /// Largest `jump - v dt` between consecutive fused positions.
    pub fused_jump_excess_max: Option<f64>,
    pub network: Option<NetworkSummary>,
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64).sqrt()
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

impl Summary {
    pub fn from_log(log: &RunLog) -> Self {
        let rows = &log.rows;
        let first_fix_t = rows.iter().find(|r| r.fused.is_some()).map(|r| r.t);
        let stopped_t = rows.iter().find(|r| r.phase == Phase::Stopped).map(|r| r.t);

        let plan = WaypointPlan {
            waypoints: log.plan.clone(),
            interp_spacing: 1.0,
            lookahead_m: 1.0,
        };
        let ct: Vec<f64> = match first_fix_t {
            Some(t0) => rows
                .iter()
                .filter(|r| r.t >= t0 + SETTLE_TIME && r.phase != Phase::Stopped)
                .map(|r| plan.cross_track(r.true_x, r.true_y))
                .collect(),
            None => Vec::new(),
        };

        let estimate_errors = log
            .mssps
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let errs: Vec<f64> = rows
                    .iter()
                    .filter_map(|r| r.mssp[i])
                    .filter_map(|c| {
                        let (x, y) = log.truth_at(c.t_capture)?;
                        Some((c.x - x).hypot(c.y - y))
                    })
                    .collect();
                EstimateError {
                    mssp: name.clone(),
                    count: errs.len(),
                    mean: if errs.is_empty() { 0.0 } else { errs.iter().sum::<f64>() / errs.len() as f64 },
                    rms: if errs.is_empty() { 0.0 } else { rms(&errs) },
                    max: if errs.is_empty() { 0.0 } else { max(&errs) },
                }
            })
            .collect();

        let mut jumps = Vec::new();
        let mut excess = Vec::new();
        for w in rows.windows(2) {
            if let (Some(a), Some(b)) = (w[0].fused, w[1].fused) {
                let j = (b.0 - a.0).hypot(b.1 - a.1);
                jumps.push(j);
                excess.push(j - w[0].true_v * (w[1].t - w[0].t));
            }
        }

        let last = rows.last();
        Self {
            rows: rows.len(),
            duration: last.map_or(0.0, |r| r.t),
            first_fix_t,
            stopped_t,
            final_x: last.map_or(0.0, |r| r.true_x),
            final_y: last.map_or(0.0, |r| r.true_y),
            cross_track_rms: (!ct.is_empty()).then(|| rms(&ct)),
            cross_track_max: (!ct.is_empty()).then(|| max(&ct)),
            estimate_errors,
            overshoot: overshoot(log),
            fused_jump_max: (!jumps.is_empty()).then(|| max(&jumps)),
            fused_jump_excess_max: (!excess.is_empty()).then(|| max(&excess)),
            network: None,
        }
    }

    pub fn with_network(mut self, m: &NetMetrics) -> Self {
        self.network = Some(NetworkSummary::from_metrics(m, self.duration));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Needs at least three waypoints: the final segment `a -> b` and the
/// waypoint `p` before it that fixes which side is "beyond". Only samples
/// whose projection falls on or past `a` count.
fn overshoot(log: &RunLog) -> Option<f64> {
    let n = log.plan.len();
    if n < 3 {
        return None;
    }
    let (p, a, b) = (log.plan[n - 3], log.plan[n - 2], log.plan[n - 1]);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = dx.hypot(dy);
    let (ux, uy) = (dx / len, dy / len);
    // left normal, flipped to point away from p
    let (mut nx, mut ny) = (-uy, ux);
    if (p.0 - a.0) * nx + (p.1 - a.1) * ny > 0.0 {
        nx = -nx;
        ny = -ny;
    }
    log.rows
        .iter()
        .filter(|r| (r.true_x - a.0) * ux + (r.true_y - a.1) * uy >= 0.0)
        .map(|r| ((r.true_x - a.0) * nx + (r.true_y - a.1) * ny).max(0.0))
        .fold(None, |acc: Option<f64>, o| Some(acc.map_or(o, |m| m.max(o))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::runlog::{MsspCell, RunLogRow};

    fn row(t: f64, x: f64, y: f64) -> RunLogRow {
        RunLogRow {
            t,
            phase: Phase::Driving,
            true_x: x,
            true_y: y,
            true_psi: 0.0,
            true_v: 3.0,
            fused: None,
            mssp: vec![None],
            yaw_rate_cmd: 0.0,
        }
    }

    #[test]
    fn hand_computed_statistics() {
        let mut log = RunLog::new(vec![(0.0, 0.0), (40.0, 0.0), (50.0, 4.0), (90.0, 4.0)], vec!["mssp1".into()], 1.0);
        log.rows.push(row(0.0, 0.0, 0.0));
        log.rows.push(row(1.0, 3.0, 0.0));
        log.rows.push(row(2.0, 6.0, 0.0));
        log.rows[0].fused = Some((0.0, 0.0));
        log.rows[1].fused = Some((3.0, 4.0));
        log.rows[1].mssp[0] = Some(MsspCell { x: 1.5, y: 0.5, t_capture: 0.5 });
        log.rows[2].mssp[0] = Some(MsspCell { x: 3.0, y: 0.0, t_capture: 1.0 });
        for (k, y) in [(11.0, 0.3), (12.0, -0.4)] {
            log.rows.push(row(k, 3.0 * k, y));
        }
        log.rows.push(row(13.0, 60.0, 4.5));
        log.rows.push(row(14.0, 63.0, 3.9));
        let s = Summary::from_log(&log);
        assert_eq!(s.first_fix_t, Some(0.0));
        assert_eq!(s.rows, 7);
        // cross-track from t >= 10: |0.3|, dist of (36, -0.4) to polyline, 0.5, 0.1
        let c = [0.3, 0.4, 0.5, 0.1];
        let expect = (c.iter().map(|v| v * v).sum::<f64>() / 4.0).sqrt();
        assert!((s.cross_track_rms.unwrap() - expect).abs() < 1e-12);
        assert!((s.cross_track_max.unwrap() - 0.5).abs() < 1e-12);
        // truth at 0.5 is (1.5, 0), at 1.0 is (3, 0)
        let e = &s.estimate_errors[0];
        assert_eq!(e.count, 2);
        assert!((e.max - 0.5).abs() < 1e-12 && (e.mean - 0.25).abs() < 1e-12);
        assert_eq!(s.fused_jump_max, Some(5.0));
        assert_eq!(s.fused_jump_excess_max, Some(2.0));
        assert!((s.overshoot.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn overshoot_needs_a_turn() {
        let mut log = RunLog::new(vec![(0.0, 0.0), (10.0, 0.0)], vec![], 1.0);
        log.rows.push(RunLogRow { mssp: vec![], ..row(0.0, 0.0, 0.0) });
        let s = Summary::from_log(&log);
        assert_eq!(s.overshoot, None);
        assert_eq!(s.first_fix_t, None);
        assert_eq!(s.cross_track_rms, None);
    }

    #[test]
    fn overshoot_side_follows_the_previous_waypoint() {
        // lane change downward: beyond means below the final lane
        let mut log = RunLog::new(vec![(0.0, 4.0), (10.0, 4.0), (20.0, 0.0), (60.0, 0.0)], vec![], 1.0);
        for (t, y) in [(0.0, 0.2), (1.0, -0.3), (2.0, 0.6)] {
            log.rows.push(RunLogRow { mssp: vec![], ..row(t, 30.0 + t, y) });
        }
        assert!((Summary::from_log(&log).overshoot.unwrap() - 0.3).abs() < 1e-12);
    }
}
