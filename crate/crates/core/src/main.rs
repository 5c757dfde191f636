use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use iea_sim::harness::distributed::{run_distributed, run_mssp_process, run_vehicle_process};
use iea_sim::harness::report::depth_report;
use iea_sim::harness::{compare_runs, export_plot_data, run_lockstep, HarnessError, Mode, RunLog, ScenarioConfig};

#[derive(Parser)]
#[command(name = "iea-sim", version, about = "Roadside-camera autonomy simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write the run log, summary and metrics.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write every camera frame as PGM under OUT/frames.
        #[arg(long)]
        dump_frames: bool,
    },
    /// Trajectory difference between two run logs.
    Compare { a: PathBuf, b: PathBuf },
    /// Write plot-ready series for a run log.
    Export {
        log: PathBuf,
        /// Defaults to the log's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare depth-based and ground-plane back-projection for one camera.
    DepthReport {
        #[arg(long, default_value = "straight_3ms")]
        scenario: String,
        /// Camera id; the first camera by default.
        #[arg(long)]
        camera: Option<u32>,
        #[arg(long, default_value_t = 10)]
        step: u32,
    },
    /// Run a single node of a distributed run (started by `run`).
    Node {
        #[arg(long, value_enum)]
        role: Role,
        #[arg(long)]
        id: Option<u32>,
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epoch_ms: u64,
        #[arg(long)]
        dump_frames: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Mssp,
    Vehicle,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, HarnessError> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn dispatch(cmd: Cmd) -> Result<(), HarnessError> {
    match cmd {
        Cmd::Run { scenario, mode, seed, out, dump_frames } => {
            let mut cfg = ScenarioConfig::load(&scenario)?;
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let out = out.unwrap_or_else(|| PathBuf::from(&cfg.log_paths.out_dir));
            std::fs::create_dir_all(&out)?;
            let output = match cfg.mode {
                Mode::Lockstep => {
                    let frames = out.join("frames");
                    if dump_frames {
                        std::fs::create_dir_all(&frames)?;
                    }
                    let o = run_lockstep(&cfg, dump_frames.then_some(frames.as_path()))?;
                    o.write(&cfg, &out)?;
                    o
                }
                Mode::Distributed => {
                    let exe = std::env::current_exe()?;
                    run_distributed(&cfg, &exe, &out, dump_frames)?
                }
            };
            if !output.completed {
                log::warn!("duration cap reached before the vehicle stopped");
            }
            println!("{}", output.summary.to_json());
            Ok(())
        }
        Cmd::Compare { a, b } => {
            let report = compare_runs(&RunLog::read_csv(&a)?, &RunLog::read_csv(&b)?)?;
            println!("{}", json(&report)?);
            Ok(())
        }
        Cmd::Export { log, out } => {
            let dir = out.unwrap_or_else(|| log.parent().map(Path::to_path_buf).unwrap_or_default());
            for p in export_plot_data(&RunLog::read_csv(&log)?, &dir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Cmd::DepthReport { scenario, camera, step } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            let cam = match camera {
                Some(id) => cfg.cameras.iter().find(|c| c.id == id),
                None => cfg.cameras.first(),
            }
            .ok_or_else(|| HarnessError::Validation("no such camera".into()))?;
            let report = depth_report(&cam.model, step).map_err(|e| HarnessError::Validation(e.to_string()))?;
            println!("{}", json(&report)?);
            Ok(())
        }
        Cmd::Node { role, id, scenario, out, epoch_ms, dump_frames } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            match role {
                Role::Mssp => {
                    let id = id.ok_or_else(|| HarnessError::Validation("--id is required for mssp".into()))?;
                    run_mssp_process(&cfg, id, &out, epoch_ms, dump_frames)?;
                }
                Role::Vehicle => {
                    run_vehicle_process(&cfg, &out, epoch_ms)?;
                }
            }
            Ok(())
        }
    }
}
