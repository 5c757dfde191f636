//! Multi-process runs over loopback UDP.
//!
//! The harness writes the resolved scenario to the output directory, picks
//! a start epoch slightly in the future and spawns one `iea-sim node`
//! process per roadside unit plus one for the vehicle. Every process keeps
//! time against that shared epoch. When all have exited the harness merges
//! their metrics with the vehicle's run log.

use std::collections::BTreeMap;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::{Child, Command};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::netbus::udp::{UdpTransport, WallClock};
use crate::netbus::{NetMetrics, NodeId};
use crate::nodes::{mssp_tick, vehicle_tick, MsspNode, MsspStats, NodeError, Phase, VehicleNode};

use super::lockstep::{RunOutput, REST_SPEED};
use super::{HarnessError, RunLog, ScenarioConfig, Summary};

/// Processes get this long to start before the shared clock reaches zero.
pub const STARTUP_MS: u64 = 500;
/// A roadside unit that has heard from the vehicle exits after this much silence.
pub const MSSP_IDLE_EXIT: f64 = 2.0;

pub const SCENARIO_FILE: &str = "scenario.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeReport {
    pub node: String,
    pub metrics: NetMetrics,
    pub stats: Option<MsspStats>,
}

pub fn metrics_file(node: NodeId) -> String {
    format!("metrics_{node}.json")
}

fn address(cfg: &ScenarioConfig, node: NodeId) -> Result<SocketAddr, HarnessError> {
    let ip: IpAddr = cfg
        .network
        .host
        .parse()
        .map_err(|_| HarnessError::Validation(format!("bad host {:?}", cfg.network.host)))?;
    let offset = match node {
        NodeId::Vehicle => 0,
        NodeId::Mssp(i) => i,
    };
    let port = u16::try_from(u32::from(cfg.network.base_port) + offset)
        .map_err(|_| HarnessError::Validation("port out of range".into()))?;
    Ok(SocketAddr::new(ip, port))
}

fn sleep_until(clock: &WallClock, t: f64) {
    let wait = t - clock.now();
    if wait > 0.0 {
        std::thread::sleep(Duration::from_secs_f64(wait));
    }
}

fn write_report(dir: &Path, report: &NodeReport) -> Result<(), HarnessError> {
    let path = dir.join(metrics_file(report.node.parse().map_err(HarnessError::Runtime)?));
    std::fs::write(path, serde_json::to_string(report)?)?;
    Ok(())
}

/// Body of a roadside-unit process.
pub fn run_mssp_process(cfg: &ScenarioConfig, id: u32, out: &Path, epoch_ms: u64, dump: bool) -> Result<MsspStats, HarnessError> {
    let camera = cfg
        .cameras
        .iter()
        .find(|c| c.id == id)
        .ok_or_else(|| HarnessError::Validation(format!("no camera with id {id}")))?;
    let me = NodeId::Mssp(id);
    let dump_dir = dump.then(|| out.join("frames"));
    if let Some(d) = &dump_dir {
        std::fs::create_dir_all(d)?;
    }
    let mut node = MsspNode::new(cfg.mssp_config(camera, dump_dir.as_deref()))?;
    let clock = WallClock::from_epoch_ms(epoch_ms);
    let peers = BTreeMap::from([(NodeId::Vehicle, address(cfg, NodeId::Vehicle)?)]);
    let mut net = UdpTransport::bind(
        me,
        address(cfg, me)?,
        peers,
        clock,
        cfg.link.drop_probability,
        cfg.seed.wrapping_add(u64::from(id)),
    )
    .map_err(NodeError::from)?;

    let period = 1.0 / cfg.vision.frame_rate;
    let mut last_heard: Option<f64> = None;
    let mut k: u64 = 0;
    loop {
        let nominal = k as f64 * period;
        if nominal > cfg.duration_cap {
            break;
        }
        sleep_until(&clock, nominal);
        let now = clock.now();
        let before = node.last_pose.as_ref().map(|p| p.seq);
        mssp_tick(&mut node, now, &mut net).map_err(NodeError::from)?;
        if node.last_pose.as_ref().map(|p| p.seq) != before {
            last_heard = Some(now);
        }
        if last_heard.is_some_and(|t| now - t > MSSP_IDLE_EXIT) {
            log::info!("{me}: vehicle silent, exiting");
            break;
        }
        k += 1;
    }
    write_report(
        out,
        &NodeReport {
            node: me.to_string(),
            metrics: net.metrics(),
            stats: Some(node.stats),
        },
    )?;
    Ok(node.stats)
}

/// Body of the vehicle process. Writes the run log.
pub fn run_vehicle_process(cfg: &ScenarioConfig, out: &Path, epoch_ms: u64) -> Result<RunLog, HarnessError> {
    let ids = cfg.mssp_ids();
    let mut node = VehicleNode::new(cfg.vehicle_config())?;
    let clock = WallClock::from_epoch_ms(epoch_ms);
    let mut peers = BTreeMap::new();
    for &i in &ids {
        peers.insert(NodeId::Mssp(i), address(cfg, NodeId::Mssp(i))?);
    }
    let mut net = UdpTransport::bind(
        NodeId::Vehicle,
        address(cfg, NodeId::Vehicle)?,
        peers,
        clock,
        cfg.link.drop_probability,
        cfg.seed,
    )
    .map_err(NodeError::from)?;
    let mut log = RunLog::new(
        cfg.waypoints.clone(),
        ids.iter().map(|&i| NodeId::Mssp(i).to_string()).collect(),
        cfg.timing.control_dt,
    );
    let runlog_path = out.join(&cfg.log_paths.runlog);

    let dt = cfg.timing.control_dt;
    let mut k: u64 = 0;
    let result = loop {
        let nominal = k as f64 * dt;
        if nominal > cfg.duration_cap {
            break Ok(());
        }
        sleep_until(&clock, nominal);
        let now = clock.now();
        match vehicle_tick(&mut node, now, &ids, &mut net) {
            Ok(o) => {
                log.record(now, &o);
                if o.phase == Phase::Stopped && o.state.v < REST_SPEED {
                    break Ok(());
                }
            }
            Err(e) => break Err(e),
        }
        k += 1;
    };
    // keep whatever was logged even if the loop failed
    log.write_csv(&runlog_path)?;
    write_report(
        out,
        &NodeReport {
            node: NodeId::Vehicle.to_string(),
            metrics: net.metrics(),
            stats: None,
        },
    )?;
    result?;
    Ok(log)
}

fn spawn(exe: &Path, args: &[String]) -> Result<Child, HarnessError> {
    Command::new(exe)
        .args(args)
        .spawn()
        .map_err(|e| HarnessError::Runtime(format!("cannot start {}: {e}", exe.display())))
}

/// Runs the scenario as separate processes of `exe` and aggregates results
/// into `out`. A failed node still leaves the partial log and summary
/// behind, then yields an error.
pub fn run_distributed(cfg: &ScenarioConfig, exe: &Path, out: &Path, dump_frames: bool) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    for id in std::iter::once(NodeId::Vehicle).chain(cfg.mssp_ids().into_iter().map(NodeId::Mssp)) {
        let _ = std::fs::remove_file(out.join(metrics_file(id)));
    }
    let _ = std::fs::remove_file(out.join(&cfg.log_paths.runlog));
    let scenario_path = out.join(SCENARIO_FILE);
    std::fs::write(&scenario_path, cfg.to_json())?;
    let now_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_err(|e| HarnessError::Runtime(e.to_string()))?
        .as_millis() as u64;
    let epoch = now_ms + STARTUP_MS;

    let common = |role: &str| -> Vec<String> {
        let mut v = vec![
            "node".to_string(),
            "--role".into(),
            role.into(),
            "--scenario".into(),
            scenario_path.display().to_string(),
            "--out".into(),
            out.display().to_string(),
            "--epoch-ms".into(),
            epoch.to_string(),
        ];
        if dump_frames && role == "mssp" {
            v.push("--dump-frames".into());
        }
        v
    };
    let mut children: Vec<(NodeId, Child)> = Vec::new();
    for id in cfg.mssp_ids() {
        let mut args = common("mssp");
        args.extend(["--id".to_string(), id.to_string()]);
        match spawn(exe, &args) {
            Ok(c) => children.push((NodeId::Mssp(id), c)),
            Err(e) => {
                kill_all(&mut children);
                return Err(e);
            }
        }
    }
    match spawn(exe, &common("vehicle")) {
        Ok(c) => children.push((NodeId::Vehicle, c)),
        Err(e) => {
            kill_all(&mut children);
            return Err(e);
        }
    }

    let deadline = Instant::now()
        + Duration::from_millis(STARTUP_MS)
        + Duration::from_secs_f64(cfg.duration_cap + MSSP_IDLE_EXIT + 10.0);
    let mut failures = Vec::new();
    for (id, child) in &mut children {
        let status = loop {
            match child.try_wait()? {
                Some(s) => break Some(s),
                None if Instant::now() > deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                None => std::thread::sleep(Duration::from_millis(20)),
            }
        };
        match status {
            Some(s) if s.success() => {}
            Some(s) => failures.push(format!("{id} exited with {s}")),
            None => failures.push(format!("{id} timed out")),
        }
    }

    let output = aggregate(cfg, out)?;
    output.write(cfg, out)?;
    if failures.is_empty() {
        Ok(output)
    } else {
        Err(HarnessError::Runtime(failures.join("; ")))
    }
}

fn kill_all(children: &mut [(NodeId, Child)]) {
    for (_, c) in children {
        let _ = c.kill();
        let _ = c.wait();
    }
}

/// Merges per-node metrics with the vehicle log found in `out`. Missing
/// files contribute nothing.
pub fn aggregate(cfg: &ScenarioConfig, out: &Path) -> Result<RunOutput, HarnessError> {
    let runlog_path: PathBuf = out.join(&cfg.log_paths.runlog);
    let log = if runlog_path.exists() {
        RunLog::read_csv(&runlog_path)?
    } else {
        RunLog::new(
            cfg.waypoints.clone(),
            cfg.mssp_ids().iter().map(|&i| NodeId::Mssp(i).to_string()).collect(),
            cfg.timing.control_dt,
        )
    };
    let mut metrics = NetMetrics::new();
    let mut mssp_stats = Vec::new();
    for id in std::iter::once(NodeId::Vehicle).chain(cfg.mssp_ids().into_iter().map(NodeId::Mssp)) {
        let path = out.join(metrics_file(id));
        let Ok(text) = std::fs::read_to_string(&path) else {
            continue;
        };
        let report: NodeReport = serde_json::from_str(&text)?;
        metrics.merge(&report.metrics);
        if let (NodeId::Mssp(i), Some(s)) = (id, report.stats) {
            mssp_stats.push((i, s));
        }
    }
    let completed = log
        .rows
        .last()
        .is_some_and(|r| r.phase == Phase::Stopped && r.true_v < REST_SPEED);
    let summary = Summary::from_log(&log).with_network(&metrics);
    Ok(RunOutput {
        log,
        summary,
        metrics,
        mssp_stats,
        completed,
    })
}

