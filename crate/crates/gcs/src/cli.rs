//! Command-line flags and the three run modes they select.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use hmt_core::bus::ClockMode;
use hmt_core::gcs::{
    load_mission, replay_file, EventLogWriter, GcsSnapshot, MissionError, ReplayError,
};
use hmt_core::harness::{HarnessError, HumanScript, Mission, RunMetrics};
use hmt_core::message::MissionFooter;
use serde::Serialize;
use thiserror::Error;

use crate::protocol::MissionMetadata;
use crate::server::{serve, Pace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClockArg {
    Lockstep,
    Realtime,
}

impl From<ClockArg> for ClockMode {
    fn from(c: ClockArg) -> Self {
        match c {
            ClockArg::Lockstep => ClockMode::Lockstep,
            ClockArg::Realtime => ClockMode::Realtime,
        }
    }
}

#[derive(Clone, Debug, Parser)]
#[command(
    name = "hmt-gcs",
    version,
    about = "Ground-control station for simulated human-multi-UAV missions"
)]
pub struct Args {
    /// Mission spec (JSON).
    #[arg(long, value_name = "FILE", required_unless_present = "replay")]
    pub scenario: Option<PathBuf>,
    /// Master seed; overrides the seed in the spec.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "lockstep")]
    pub clock: ClockArg,
    /// Run without the console socket and print metrics when done.
    #[arg(long)]
    pub headless: bool,
    /// Scripted operator (JSON). Without one, headless runs have no human.
    #[arg(long, value_name = "FILE")]
    pub human_script: Option<PathBuf>,
    /// Event log output (newline-delimited JSON).
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
    /// Rebuild model states from a recorded log and print them.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["scenario", "headless", "human_script", "log"])]
    pub replay: Option<PathBuf>,
    #[arg(long, value_name = "ADDR", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Also write the run metrics (JSON) here.
    #[arg(long, value_name = "PATH")]
    pub metrics: Option<PathBuf>,
    /// Wall-clock milliseconds per lockstep tick when serving the console.
    #[arg(long, value_name = "MS", default_value_t = 10)]
    pub tick_wall_ms: u64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("lockstep runs need a seed: pass --seed or set one in the spec")]
    MissingSeed,
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("mission task failed: {0}")]
    Join(#[from] tokio::task::JoinError),
}

/// Final states printed by `--replay`.
#[derive(Debug, Serialize)]
pub struct ReplayReport {
    pub applied: Option<u64>,
    pub footer: Option<MissionFooter>,
    pub metrics: RunMetrics,
    pub state: GcsSnapshot,
}

fn write(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })
}

fn emit_metrics(args: &Args, metrics: &RunMetrics) -> Result<String, CliError> {
    let json = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    if let Some(p) = &args.metrics {
        write(p, &json)?;
    }
    Ok(json)
}

/// Loads, validates and starts the mission the flags describe.
pub fn start(args: &Args) -> Result<(Mission, MissionMetadata), CliError> {
    let clock: ClockMode = args.clock.into();
    let mut spec = load_mission(
        args.scenario.as_ref().expect("clap requires a scenario"),
        ClockMode::Realtime,
    )?
    .spec;
    if let Some(seed) = args.seed {
        spec.seed = Some(seed);
    }
    let spec = spec.validate(clock)?;
    for w in &spec.warnings {
        tracing::warn!("{w}");
    }
    let spec = spec.spec;
    let seed = match (spec.seed, clock) {
        (Some(s), _) => s,
        (None, ClockMode::Lockstep) => return Err(CliError::MissingSeed),
        (None, ClockMode::Realtime) => std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos() as u64),
    };
    let script = args
        .human_script
        .as_ref()
        .map(HumanScript::load)
        .transpose()?;
    let log = match &args.log {
        Some(p) => EventLogWriter::to_file(p).map_err(HarnessError::from)?,
        None => EventLogWriter::new(),
    };
    let metadata = MissionMetadata::new(&spec, seed, clock);
    Ok((Mission::start(spec, seed, clock, script, log)?, metadata))
}

/// Replay mode: prints the reconstructed final states as JSON.
pub fn run_replay(args: &Args) -> Result<String, CliError> {
    let path = args.replay.as_ref().expect("replay mode");
    let text = std::fs::read_to_string(path)?;
    let result = replay_file(path, None)?;
    let metrics = RunMetrics::from_log(&text)?;
    emit_metrics(args, &metrics)?;
    let report = ReplayReport {
        applied: result.replayer.applied(),
        footer: result.replayer.footer().cloned(),
        metrics,
        state: result.replayer.gcs().snapshot(),
    };
    Ok(serde_json::to_string_pretty(&report).expect("report serializes"))
}

/// Headless mode: runs to the end and returns the metrics JSON.
pub async fn run_headless(args: &Args) -> Result<String, CliError> {
    let (mut mission, _) = start(args)?;
    match args.clock {
        ClockArg::Lockstep => mission.run_to_end(|_| {})?,
        ClockArg::Realtime => {
            mission = crate::server::Driver::new(mission, Pace::Realtime)
                .0
                .run()
                .await?;
        }
    }
    let metrics = RunMetrics::from_log(&mission.log().text()).map_err(HarnessError::from)?;
    emit_metrics(args, &metrics)
}

/// Console mode: serves the socket until the mission ends, then keeps serving the final frame.
pub async fn run_console(args: &Args) -> Result<String, CliError> {
    let (mission, metadata) = start(args)?;
    let pace = match args.clock {
        ClockArg::Lockstep => Pace::Lockstep {
            period: Duration::from_millis(args.tick_wall_ms),
        },
        ClockArg::Realtime => Pace::Realtime,
    };
    let served = serve(mission, pace, metadata, args.listen).await?;
    tracing::info!(addr = %served.addr, "console socket ready");
    let _ = writeln!(std::io::stdout(), "listening on http://{}", served.addr);
    let mission = served.mission.await??;
    let metrics = RunMetrics::from_log(&mission.log().text()).map_err(HarnessError::from)?;
    let json = emit_metrics(args, &metrics)?;
    let _ = writeln!(std::io::stdout(), "{json}");
    tracing::info!("mission finished; still serving the final frame");
    let _keep_alive = mission;
    served.server.await??;
    Ok(String::new())
}
