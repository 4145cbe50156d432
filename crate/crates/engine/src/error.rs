use std::path::PathBuf;

use thiserror::Error;

use retarget_core::calibration::CalibrationError;
use retarget_core::retarget::RetargetError;
use retarget_core::sim::SimError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: std::io::Error },
    #[error("replay file not found: {}", .0.display())]
    ReplayNotFound(PathBuf),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Retarget(#[from] RetargetError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EngineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            EngineError::BindFailure { .. } => 2,
            EngineError::ReplayNotFound(_) => 3,
            EngineError::ConfigInvalid(_) => 4,
            _ => 1,
        }
    }
}
