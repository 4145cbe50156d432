use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use retarget_core::calibration::OperatorFrames;
use retarget_core::sim::TrajectorySample;

use crate::session::{Clock, Session, SessionReport};
use crate::{EngineError, SessionConfig};

/// Appends every inbound line, verbatim, before it is parsed.
pub struct Recorder {
    out: BufWriter<File>,
}

impl Recorder {
    pub fn create(path: &Path) -> Result<Self, EngineError> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn record(&mut self, line: &str) -> Result<(), EngineError> {
        self.out.write_all(line.trim_end_matches(['\r', '\n']).as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn load_frames(path: &Path) -> Result<OperatorFrames, EngineError> {
    let text = std::fs::read_to_string(path).map_err(|e| EngineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| EngineError::ConfigInvalid(format!("{}: {e}", path.display())))
}

pub fn initial_frames(cfg: &SessionConfig) -> Result<Option<OperatorFrames>, EngineError> {
    cfg.frames.as_deref().map(load_frames).transpose()
}

/// Feeds a recorded session through a fresh engine, with frame timestamps
/// driving the simulated clock.
pub fn run_replay(cfg: &SessionConfig) -> Result<(SessionReport, Vec<TrajectorySample>), EngineError> {
    cfg.validate()?;
    let path = cfg
        .replay
        .as_deref()
        .ok_or_else(|| EngineError::ConfigInvalid("no replay file".into()))?;
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => EngineError::ReplayNotFound(path.to_path_buf()),
        _ => EngineError::Io(e),
    })?;
    let mut recorder = cfg.record.as_deref().map(Recorder::create).transpose()?;
    let mut session = Session::new(cfg, initial_frames(cfg)?, Clock::FrameTimes)?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if let Some(r) = recorder.as_mut() {
            r.record(&line)?;
        }
        for reply in session.handle_line(&line) {
            log::debug!("line {}: {}", i + 1, reply.to_line());
        }
    }
    Ok(session.finish())
}

pub fn write_report(report: &SessionReport, path: Option<&Path>) -> Result<(), EngineError> {
    let mut text = serde_json::to_string_pretty(report).expect("reports serialize");
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn write_trajectory(samples: &[TrajectorySample], path: &Path) -> Result<(), EngineError> {
    let mut out = BufWriter::new(File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut out, s).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectorySample>, EngineError> {
    let file = File::open(path).map_err(|e| EngineError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EngineError::Input {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

/// Writes the report (stdout when no path is configured) and the trajectory
/// log if one is configured.
pub fn write_outputs(cfg: &SessionConfig, report: &SessionReport, trajectory: &[TrajectorySample]) -> Result<(), EngineError> {
    if let Some(p) = &cfg.log {
        write_trajectory(trajectory, p)?;
    }
    write_report(report, cfg.report.as_deref())
}
