//! Trajectory differences between two runs of the same plan.

use serde::{Deserialize, Serialize};

use crate::nodes::Phase;

use super::{HarnessError, RunLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub samples: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub max: f64,
    pub rms: f64,
    pub mean: f64,
}

/// Rows before the vehicle first reports itself stopped.
fn moving(log: &RunLog) -> &[crate::harness::RunLogRow] {
    let end = log
        .rows
        .iter()
        .position(|r| r.phase == Phase::Stopped)
        .unwrap_or(log.rows.len());
    &log.rows[..end]
}

/// Compares true positions. Each moving row of `a` whose time lies within
/// the moving span of `b` is matched against `b` linearly interpolated in t.
pub fn compare_runs(a: &RunLog, b: &RunLog) -> Result<CompareReport, HarnessError> {
    if a.plan != b.plan {
        return Err(HarnessError::Validation("runs follow different waypoint plans".into()));
    }
    let (ra, rb) = (moving(a), moving(b));
    let mut diffs = Vec::new();
    let mut span = (f64::INFINITY, f64::NEG_INFINITY);
    if let (Some(b0), Some(b1)) = (rb.first(), rb.last()) {
        for r in ra.iter().filter(|r| r.t >= b0.t && r.t <= b1.t) {
            let i = rb.partition_point(|q| q.t <= r.t);
            let (x, y) = if i == rb.len() {
                (b1.true_x, b1.true_y)
            } else {
                let (p, q) = (&rb[i - 1], &rb[i]);
                let s = (r.t - p.t) / (q.t - p.t);
                (p.true_x + s * (q.true_x - p.true_x), p.true_y + s * (q.true_y - p.true_y))
            };
            diffs.push((r.true_x - x).hypot(r.true_y - y));
            span = (span.0.min(r.t), span.1.max(r.t));
        }
    }
    if diffs.is_empty() {
        return Err(HarnessError::Validation("runs share no time range".into()));
    }
    let n = diffs.len() as f64;
    Ok(CompareReport {
        samples: diffs.len(),
        t_start: span.0,
        t_end: span.1,
        max: diffs.iter().copied().fold(0.0, f64::max),
        rms: (diffs.iter().map(|d| d * d).sum::<f64>() / n).sqrt(),
        mean: diffs.iter().sum::<f64>() / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::RunLogRow;

    fn log(t0: f64, y: f64, n: usize) -> RunLog {
        let mut log = RunLog::new(vec![(0.0, 0.0), (100.0, 0.0)], vec![], 0.1);
        for k in 0..n {
            let t = t0 + k as f64 * 0.1;
            log.rows.push(RunLogRow {
                t,
                phase: Phase::Driving,
                true_x: 3.0 * t,
                true_y: y,
                true_psi: 0.0,
                true_v: 3.0,
                fused: None,
                mssp: vec![],
                yaw_rate_cmd: 0.0,
            });
        }
        log
    }

    #[test]
    fn self_comparison_is_zero() {
        let a = log(0.0, 0.0, 50);
        let r = compare_runs(&a, &a).unwrap();
        assert_eq!((r.samples, r.max, r.rms, r.mean), (50, 0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_offset_and_interpolation() {
        let a = log(0.0, 0.5, 50);
        let b = log(0.05, 0.0, 50);
        let r = compare_runs(&a, &b).unwrap();
        // a's rows from 0.1 to 4.9 fall inside b's span [0.05, 4.95]
        assert_eq!(r.samples, 49);
        assert!((r.max - 0.5).abs() < 1e-12 && (r.rms - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disjoint_times_and_plans_are_errors() {
        let a = log(0.0, 0.0, 10);
        let b = log(5.0, 0.0, 10);
        assert!(compare_runs(&a, &b).is_err());
        let mut c = log(0.0, 0.0, 10);
        c.plan[1].1 = 1.0;
        assert!(compare_runs(&a, &c).is_err());
    }

    #[test]
    fn stopped_rows_are_ignored() {
        let a = log(0.0, 0.0, 20);
        let mut b = log(0.0, 0.0, 20);
        for r in &mut b.rows[10..] {
            r.phase = Phase::Stopped;
            r.true_y = 9.0;
        }
        let r = compare_runs(&a, &b).unwrap();
        assert_eq!((r.samples, r.max), (10, 0.0));
    }
}
