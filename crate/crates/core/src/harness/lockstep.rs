//! Single-threaded run on one simulated clock.
//!
//! Every node shares one integer-nanosecond clock. At each tick the network
//! delivers what is due, then the vehicle steps (every control period),
//! then every roadside unit steps (every frame period).

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::netbus::sim::{ns_to_secs, secs_to_ns, SimNetwork};
use crate::netbus::{NetMetrics, NodeId};
use crate::nodes::{mssp_tick, vehicle_tick, MsspNode, MsspStats, Phase, VehicleNode};

use super::{HarnessError, RunLog, ScenarioConfig, Summary};

/// Below this speed a stopped vehicle counts as at rest and the run ends.
pub const REST_SPEED: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: RunLog,
    pub summary: Summary,
    pub metrics: NetMetrics,
    pub mssp_stats: Vec<(u32, MsspStats)>,
    /// False when the duration cap ended the run.
    pub completed: bool,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn run_lockstep(cfg: &ScenarioConfig, dump_dir: Option<&Path>) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let ids = cfg.mssp_ids();
    let mut vehicle = VehicleNode::new(cfg.vehicle_config())?;
    let mut mssps = cfg
        .cameras
        .iter()
        .map(|c| MsspNode::new(cfg.mssp_config(c, dump_dir)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut net = SimNetwork::new(cfg.link_config());
    let mut log = RunLog::new(
        cfg.waypoints.clone(),
        ids.iter().map(|&i| NodeId::Mssp(i).to_string()).collect(),
        cfg.timing.control_dt,
    );

    let ctrl_ns = secs_to_ns(cfg.timing.control_dt);
    let frame_ns = secs_to_ns(1.0 / cfg.vision.frame_rate);
    let tick_ns = gcd(ctrl_ns, frame_ns);
    let cap_ns = secs_to_ns(cfg.duration_cap);

    let mut completed = false;
    let mut t_ns = 0;
    while t_ns <= cap_ns {
        net.advance_to(t_ns);
        let t = ns_to_secs(t_ns);
        if t_ns % ctrl_ns == 0 {
            let out = vehicle_tick(&mut vehicle, t, &ids, &mut net.port(NodeId::Vehicle))?;
            log.record(t, &out);
            if out.phase == Phase::Stopped && out.state.v < REST_SPEED {
                completed = true;
                break;
            }
        }
        if t_ns % frame_ns == 0 {
            for node in &mut mssps {
                let id = NodeId::Mssp(node.id);
                mssp_tick(node, t, &mut net.port(id)).map_err(crate::nodes::NodeError::from)?;
            }
        }
        t_ns += tick_ns;
    }

    let metrics = net.into_metrics();
    let summary = Summary::from_log(&log).with_network(&metrics);
    Ok(RunOutput {
        log,
        summary,
        metrics,
        mssp_stats: mssps.iter().map(|m| (m.id, m.stats)).collect(),
        completed,
    })
}

/// Writes a metrics time series with one row per link per window.
pub fn write_net_metrics(metrics: &NetMetrics, window: f64, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["window_start", "from", "to", "packets", "bytes", "packets_per_s", "bytes_per_s"])?;
    for (start, r) in metrics.time_series(window) {
        w.write_record([
            start.to_string(),
            r.from,
            r.to,
            r.packets.to_string(),
            r.bytes.to_string(),
            r.packets_per_s.to_string(),
            r.bytes_per_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl RunOutput {
    /// Writes the run log, summary and metrics series under `dir` using the
    /// scenario's file names. Returns the paths written.
    pub fn write(&self, cfg: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        std::fs::create_dir_all(dir)?;
        let paths = &cfg.log_paths;
        let runlog = dir.join(&paths.runlog);
        self.log.write_csv(&runlog)?;
        let summary = dir.join(&paths.summary);
        let mut f = std::fs::File::create(&summary)?;
        writeln!(f, "{}", self.summary.to_json())?;
        let net = dir.join(&paths.net_metrics);
        write_net_metrics(&self.metrics, 1.0, &net)?;
        Ok(vec![runlog, summary, net])
    }
}
