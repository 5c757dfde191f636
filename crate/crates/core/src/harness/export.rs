//! Plot-ready CSV series.
//!
//! `truth_vs_estimates.csv`: `t,true_x,true_y,true_psi`, then
//! `mssp<i>_x,mssp<i>_y` per unit, then `fused_x,fused_y`.
//!
//! `closed_loop.csv`: `t,actual_x,actual_y,desired_x,desired_y,cross_track,yaw_rate_cmd`,
//! where the desired point is the closest point on the waypoint polyline.

use std::path::{Path, PathBuf};

use super::{HarnessError, RunLog};

pub const ESTIMATES_FILE: &str = "truth_vs_estimates.csv";
pub const CLOSED_LOOP_FILE: &str = "closed_loop.csv";

fn closest_on_polyline(plan: &[(f64, f64)], p: (f64, f64)) -> (f64, f64) {
    let mut best = plan[0];
    let mut best_d = f64::INFINITY;
    for w in plan.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let s = if len2 > 0.0 {
            (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = (a.0 + s * dx, a.1 + s * dy);
        let d = (p.0 - q.0).hypot(p.1 - q.1);
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    best
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn export_plot_data(log: &RunLog, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir)?;

    let est_path = out_dir.join(ESTIMATES_FILE);
    let mut w = csv::Writer::from_path(&est_path)?;
    let mut header: Vec<String> = ["t", "true_x", "true_y", "true_psi"].map(String::from).to_vec();
    for m in &log.mssps {
        header.push(format!("{m}_x"));
        header.push(format!("{m}_y"));
    }
    header.extend(["fused_x".to_string(), "fused_y".to_string()]);
    w.write_record(&header)?;
    for r in &log.rows {
        let mut rec = vec![
            r.t.to_string(),
            r.true_x.to_string(),
            r.true_y.to_string(),
            r.true_psi.to_string(),
        ];
        for c in &r.mssp {
            rec.push(cell(c.map(|c| c.x)));
            rec.push(cell(c.map(|c| c.y)));
        }
        rec.push(cell(r.fused.map(|f| f.0)));
        rec.push(cell(r.fused.map(|f| f.1)));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let loop_path = out_dir.join(CLOSED_LOOP_FILE);
    let mut w = csv::Writer::from_path(&loop_path)?;
    w.write_record([
        "t", "actual_x", "actual_y", "desired_x", "desired_y", "cross_track", "yaw_rate_cmd",
    ])?;
    for r in &log.rows {
        let q = closest_on_polyline(&log.plan, (r.true_x, r.true_y));
        w.write_record([
            r.t.to_string(),
            r.true_x.to_string(),
            r.true_y.to_string(),
            q.0.to_string(),
            q.1.to_string(),
            (r.true_x - q.0).hypot(r.true_y - q.1).to_string(),
            r.yaw_rate_cmd.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(vec![est_path, loop_path])
}
