//! Whole-scenario runs through the library API.

use std::path::Path;
use std::process::Command;

use iea_sim::harness::distributed::run_distributed;
use iea_sim::harness::{compare_runs, export_plot_data, run_lockstep, HarnessError, RunLog, ScenarioConfig};
use iea_sim::nodes::Phase;

fn short(name: &str, cap: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::bundled(name).unwrap();
    cfg.duration_cap = cap;
    cfg
}

#[test]
fn zero_camera_scenario_is_rejected() {
    let mut cfg = short("straight_3ms", 5.0);
    cfg.cameras.clear();
    let err = run_lockstep(&cfg, None).unwrap_err();
    assert!(matches!(err, HarnessError::Validation(_)));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn same_seed_gives_identical_logs_and_other_seed_differs_only_in_timing() {
    let cfg = short("straight_3ms", 20.0);
    let a = run_lockstep(&cfg, None).unwrap();
    let b = run_lockstep(&cfg, None).unwrap();
    assert_eq!(a.log.to_csv_string(), b.log.to_csv_string());
    assert_eq!(a.metrics, b.metrics);
    let mut other = cfg.clone();
    other.seed = 99;
    let c = run_lockstep(&other, None).unwrap();
    assert_ne!(a.metrics.latency_samples(), c.metrics.latency_samples());
}

#[test]
fn full_corridor_run_completes_and_roundtrips() {
    let cfg = ScenarioConfig::bundled("straight_3ms").unwrap();
    let out = run_lockstep(&cfg, None).unwrap();
    assert!(out.completed);
    let last = out.log.rows.last().unwrap();
    assert_eq!(last.phase, Phase::Stopped);
    // stops after losing the last cell, before the end of the plan
    assert!(last.true_x > 160.0 && last.true_x < 180.0, "{}", last.true_x);
    for w in out.log.rows.windows(2) {
        assert!(w[1].t > w[0].t);
    }
    for (id, s) in &out.mssp_stats {
        assert!(s.published > 250, "mssp{id}: {s:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let paths = out.write(&cfg, dir.path()).unwrap();
    let back = RunLog::read_csv(&paths[0]).unwrap();
    assert_eq!(back, out.log);
    let r = compare_runs(&back, &out.log).unwrap();
    assert_eq!((r.max, r.rms), (0.0, 0.0));

    let files = export_plot_data(&back, dir.path()).unwrap();
    let text = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(text.lines().next().unwrap().split(',').count(), 4 + 2 * 3 + 2);
    assert_eq!(text.lines().count(), out.log.rows.len() + 1);
}

#[test]
fn summary_matches_independent_script() {
    if Command::new("python3").arg("--version").output().is_err() {
        eprintln!("python3 not available, skipping");
        return;
    }
    let cfg = ScenarioConfig::bundled("straight_6ms").unwrap();
    let out = run_lockstep(&cfg, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = out.write(&cfg, dir.path()).unwrap();
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/summarize_runlog.py");
    let res = Command::new("python3").arg(script).arg(&paths[0]).output().unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let py: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    let ours = serde_json::to_value(&out.summary).unwrap();
    let mut checked = 0;
    compare(&ours, &py, "", &mut checked);
    assert!(checked > 20);
}

fn compare(ours: &serde_json::Value, py: &serde_json::Value, path: &str, checked: &mut usize) {
    use serde_json::Value;
    match py {
        Value::Object(m) => {
            for (k, v) in m {
                compare(&ours[k], v, &format!("{path}.{k}"), checked);
            }
        }
        Value::Array(a) => {
            assert_eq!(ours.as_array().unwrap().len(), a.len(), "{path}");
            for (i, v) in a.iter().enumerate() {
                compare(&ours[i], v, &format!("{path}[{i}]"), checked);
            }
        }
        Value::Number(n) => {
            let (x, y) = (ours.as_f64().unwrap(), n.as_f64().unwrap());
            assert!((x - y).abs() <= 1e-9, "{path}: {x} vs {y}");
            *checked += 1;
        }
        other => assert_eq!(ours, other, "{path}"),
    }
}

#[test]
fn crashed_nodes_leave_partial_output_and_fail() {
    let mut cfg = short("straight_3ms", 2.0);
    cfg.mode = iea_sim::harness::Mode::Distributed;
    cfg.network.base_port = 48110;
    let dir = tempfile::tempdir().unwrap();
    let err = run_distributed(&cfg, Path::new("/bin/false"), dir.path(), false).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(dir.path().join("runlog.csv").exists());
    assert!(dir.path().join("summary.json").exists());
    let log = RunLog::read_csv(&dir.path().join("runlog.csv")).unwrap();
    assert!(log.rows.is_empty());
}
