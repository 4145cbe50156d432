use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use retarget_core::calibration::frame_quality_report;
use retarget_core::sim::summarize_trajectory;
use retarget_engine::protocol::{CalibControl, ClientMessage};
use retarget_engine::replay::{read_trajectory, run_replay, write_outputs};
use retarget_engine::script::{scripted_session, write_session, ScriptConfig};
use retarget_engine::session::SweepCollector;
use retarget_engine::{EngineError, SessionConfig, Transport};

#[derive(Parser)]
#[command(name = "engine", version, about = "Hand-pose to end-effector retargeting engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Websocket,
    Tcp,
}

#[derive(Subcommand)]
enum Command {
    /// Run a live session or replay a recorded one.
    Run(RunArgs),
    /// Calibrate from recorded sweeps and print the frame quality report.
    CalibrateCheck {
        sweeps: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
        /// Save the calibrated frames for `run --frames`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize an episode trajectory log.
    Report {
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Write a scripted calibration and teleoperation session.
    Generate {
        out: PathBuf,
        /// Seconds of teleoperation after calibration.
        #[arg(long, default_value_t = 300.0)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Episode report path; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Trajectory log path.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Saved calibration to start from.
    #[arg(long)]
    frames: Option<PathBuf>,
    #[arg(long, value_enum)]
    transport: Option<TransportArg>,
}

fn load_config(path: Option<&Path>) -> Result<SessionConfig, EngineError> {
    path.map(SessionConfig::load).transpose().map(Option::unwrap_or_default)
}

fn session_config(args: RunArgs) -> Result<SessionConfig, EngineError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if args.listen.is_some() {
        cfg.listen = args.listen;
    }
    if args.replay.is_some() {
        cfg.replay = args.replay;
    }
    if args.record.is_some() {
        cfg.record = args.record;
    }
    if args.report.is_some() {
        cfg.report = args.report;
    }
    if args.log.is_some() {
        cfg.log = args.log;
    }
    if args.frames.is_some() {
        cfg.frames = args.frames;
    }
    if let Some(s) = args.scenario {
        cfg.scenario = s.parse().map_err(|e| EngineError::ConfigInvalid(format!("{e}")))?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.transport {
        cfg.transport = match t {
            TransportArg::Websocket => Transport::Websocket,
            TransportArg::Tcp => Transport::Tcp,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<(), EngineError> {
    let cfg = session_config(args)?;
    if cfg.replay.is_some() {
        let (report, trajectory) = run_replay(&cfg)?;
        return write_outputs(&cfg, &report, &trajectory);
    }
    let addr = cfg.listen.clone().unwrap_or_default();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|source| EngineError::BindFailure { addr: addr.clone(), source })?;
        log::info!("listening on {} ({:?})", listener.local_addr()?, cfg.transport);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        };
        let (report, trajectory) = retarget_engine::server::serve(cfg.clone(), listener, shutdown).await?;
        write_outputs(&cfg, &report, &trajectory)
    })
}

fn calibrate_check(sweeps: &Path, config: Option<&Path>, seed: Option<u64>, json: bool, out: Option<&Path>) -> Result<(), EngineError> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let input = |message: String| EngineError::Input {
        path: sweeps.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(sweeps).map_err(|e| input(e.to_string()))?;
    let mut collector = SweepCollector::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let msg = ClientMessage::parse(line).map_err(|e| input(format!("line {}: {e}", i + 1)))?;
        match msg {
            ClientMessage::CalibControl(CalibControl::BeginAxis { axis }) => collector.begin(axis),
            ClientMessage::CalibControl(CalibControl::EndAxis) => {
                collector.end().map_err(|e| input(format!("line {}: {}", i + 1, e.message)))?;
            }
            ClientMessage::CalibControl(CalibControl::Finish) => {}
            ClientMessage::HandFrame(frame) => {
                if collector.collecting().is_some() {
                    if let Err(e) = collector.push(&frame) {
                        log::warn!("line {}: {}", i + 1, e.message);
                    }
                }
            }
        }
    }
    let frames = collector.finish(&cfg.calibration_config())?;
    if let Some(p) = out {
        std::fs::write(p, serde_json::to_string_pretty(&frames).expect("frames serialize") + "\n")?;
    }
    let report = frame_quality_report(&frames);
    if json {
        emit(&(serde_json::to_string_pretty(&report).expect("reports serialize") + "\n"))
    } else {
        emit(&report.to_string())
    }
}

fn report(log_path: &Path, config: Option<&Path>, json: bool) -> Result<(), EngineError> {
    let cfg = load_config(config)?;
    let samples = read_trajectory(log_path)?;
    let Some(s) = summarize_trajectory(&samples, &cfg.retarget) else {
        return emit("empty trajectory\n");
    };
    if json {
        return emit(&(serde_json::to_string_pretty(&s).expect("summaries serialize") + "\n"));
    }
    let p = samples.last().expect("non-empty").achieved.translation;
    let mut text = String::new();
    let _ = writeln!(text, "ticks: {}", s.samples);
    let _ = writeln!(text, "time: {:.2} s to {:.2} s", s.start_time, s.end_time);
    let _ = writeln!(text, "commanded path: {:.4} m", s.commanded_path_length);
    let _ = writeln!(text, "achieved path: {:.4} m", s.achieved_path_length);
    let _ = writeln!(
        text,
        "max tracking error: {:.2} mm, {:.2}°",
        s.max_tracking_error * 1e3,
        s.max_rotation_tracking_error.to_degrees()
    );
    let _ = writeln!(text, "final tracking error: {:.3} mm", s.final_tracking_error * 1e3);
    let _ = writeln!(
        text,
        "time at scale: fast {:.2} s, slow {:.2} s, frozen {:.2} s",
        s.time_by_alpha[0], s.time_by_alpha[1], s.time_by_alpha[2]
    );
    let _ = writeln!(text, "gripper toggles: {}", s.gripper_toggles);
    let _ = writeln!(text, "final position: [{:.5}, {:.5}, {:.5}] m", p.x, p.y, p.z);
    emit(&text)
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), EngineError> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ENGINE_LOG_LEVEL", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::CalibrateCheck {
            sweeps,
            config,
            seed,
            json,
            out,
        } => calibrate_check(&sweeps, config.as_deref(), seed, json, out.as_deref()),
        Command::Report { log, config, json } => report(&log, config.as_deref(), json),
        Command::Generate { out, duration, seed } => {
            let msgs = scripted_session(&ScriptConfig {
                duration,
                seed,
                ..Default::default()
            });
            write_session(&msgs, &out).map_err(EngineError::from)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("engine: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
