//! The `iea-sim` binary: subcommands, files written and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use iea_sim::harness::ScenarioConfig;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iea-sim")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_scenario(dir: &Path, cfg: &ScenarioConfig) -> String {
    let p = dir.join("scenario.json");
    std::fs::write(&p, cfg.to_json()).unwrap();
    p.display().to_string()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&sim(&["--help"])), 0);
    assert_eq!(code(&sim(&["--version"])), 0);
    assert_eq!(code(&sim(&[])), 1);
    assert_eq!(code(&sim(&["run"])), 1);
    assert_eq!(code(&sim(&["run", "--scenario", "straight_3ms", "--mode", "warp"])), 1);
}

#[test]
fn invalid_scenarios_exit_with_one() {
    assert_eq!(code(&sim(&["run", "--scenario", "/nonexistent/nothing.json"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::bundled("straight_3ms").unwrap();
    cfg.cameras.clear();
    let p = write_scenario(dir.path(), &cfg);
    let o = sim(&["run", "--scenario", &p, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("camera"));
    std::fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    let bad = dir.path().join("bad.json");
    assert_eq!(code(&sim(&["run", "--scenario", bad.to_str().unwrap()])), 1);
}

#[test]
fn run_compare_export_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::bundled("straight_3ms").unwrap();
    cfg.duration_cap = 15.0;
    let scen = write_scenario(dir.path(), &cfg);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, seed) in [(&out_a, "3"), (&out_b, "4")] {
        let o = sim(&["run", "--scenario", &scen, "--seed", seed, "--out", out.to_str().unwrap(), "--dump-frames"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(summary["first_fix_t"].as_f64().unwrap() > 10.0);
        for f in ["runlog.csv", "summary.json", "net_metrics.csv"] {
            assert!(out.join(f).exists(), "{f}");
        }
    }
    assert!(out_a.join("frames/mssp1_f1.pgm").exists());

    let (la, lb) = (out_a.join("runlog.csv"), out_b.join("runlog.csv"));
    let o = sim(&["compare", la.to_str().unwrap(), la.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["max"].as_f64(), Some(0.0));
    let o = sim(&["compare", la.to_str().unwrap(), lb.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["max"].as_f64().unwrap() < 0.1);

    // a log with a different plan cannot be compared
    let text = std::fs::read_to_string(&lb).unwrap().replacen("plan=0:0", "plan=0:1", 1);
    let other = dir.path().join("other.csv");
    std::fs::write(&other, text).unwrap();
    assert_eq!(code(&sim(&["compare", la.to_str().unwrap(), other.to_str().unwrap()])), 1);
    assert_eq!(code(&sim(&["compare", la.to_str().unwrap(), "/nonexistent.csv"])), 2);

    let o = sim(&["export", la.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let est = std::fs::read_to_string(out_a.join("truth_vs_estimates.csv")).unwrap();
    assert_eq!(
        est.lines().next().unwrap(),
        "t,true_x,true_y,true_psi,mssp1_x,mssp1_y,mssp2_x,mssp2_y,mssp3_x,mssp3_y,fused_x,fused_y"
    );
    assert!(out_a.join("closed_loop.csv").exists());
}

#[test]
fn depth_report_prints_on_axis_discrepancy() {
    let o = sim(&["depth-report", "--step", "50"]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let on_axis = r["on_axis_horizontal"].as_f64().unwrap();
    assert!((on_axis - 9.0 * (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-6);
}

#[test]
fn distributed_run_over_loopback() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::bundled("straight_3ms").unwrap();
    cfg.duration_cap = 3.0;
    cfg.vehicle.initial.x = 27.0;
    cfg.network.base_port = 48120;
    let scen = write_scenario(dir.path(), &cfg);
    let out = dir.path().join("d");
    let o = sim(&["run", "--scenario", &scen, "--mode", "distributed", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["runlog.csv", "summary.json", "metrics_veh.json", "metrics_mssp1.json", "scenario.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["network"]["packets"].as_u64().unwrap() > 100);
    assert!(summary["first_fix_t"].as_f64().is_some());
}
