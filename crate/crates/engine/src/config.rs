use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use retarget_core::calibration::CalibrationConfig;
use retarget_core::hand::CameraIntrinsics;
use retarget_core::retarget::RetargetConfig;
use retarget_core::sim::{ScenarioKind, ServoConfig};

use crate::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    #[default]
    Websocket,
    Tcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSettings {
    pub ransac_iterations: usize,
    /// Meters.
    pub ransac_threshold: f64,
    pub min_samples: usize,
    /// Meters.
    pub min_extent: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        let d = CalibrationConfig::default();
        Self {
            ransac_iterations: d.ransac.iterations,
            ransac_threshold: d.ransac.inlier_threshold,
            min_samples: d.min_samples,
            min_extent: d.min_extent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub listen: Option<String>,
    pub transport: Transport,
    pub replay: Option<PathBuf>,
    pub record: Option<PathBuf>,
    /// Where to write the episode report; stdout when unset.
    pub report: Option<PathBuf>,
    /// Where to write the per-tick trajectory log.
    pub log: Option<PathBuf>,
    /// A saved calibration to start from.
    pub frames: Option<PathBuf>,
    pub scenario: ScenarioKind,
    /// Seeds calibration line fitting.
    pub seed: u64,
    pub retarget: RetargetConfig,
    pub servo: ServoConfig,
    pub camera: CameraIntrinsics,
    pub calibration: CalibrationSettings,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            listen: None,
            transport: Transport::default(),
            replay: None,
            record: None,
            report: None,
            log: None,
            frames: None,
            scenario: ScenarioKind::PegInHole,
            seed: 0,
            retarget: RetargetConfig::default(),
            servo: ServoConfig::default(),
            camera: CameraIntrinsics::default(),
            calibration: CalibrationSettings::default(),
        }
    }
}

fn check_writable(path: &Path, what: &str) -> Result<(), EngineError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(EngineError::ConfigInvalid(format!(
            "{what} directory {} does not exist",
            parent.display()
        )));
    }
    if path.is_dir() {
        return Err(EngineError::ConfigInvalid(format!("{what} path {} is a directory", path.display())));
    }
    Ok(())
}

impl SessionConfig {
    pub fn from_toml(text: &str) -> Result<Self, EngineError> {
        toml::from_str(text).map_err(|e| EngineError::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn calibration_config(&self) -> CalibrationConfig {
        let mut c = CalibrationConfig::default();
        c.ransac.iterations = self.calibration.ransac_iterations;
        c.ransac.inlier_threshold = self.calibration.ransac_threshold;
        c.ransac.seed = self.seed;
        c.min_samples = self.calibration.min_samples;
        c.min_extent = self.calibration.min_extent;
        c
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        match (&self.listen, &self.replay) {
            (Some(_), Some(_)) => {
                return Err(EngineError::ConfigInvalid("listen and replay are mutually exclusive".into()))
            }
            (None, None) => return Err(EngineError::ConfigInvalid("one of listen or replay is required".into())),
            _ => {}
        }
        let invalid = |e: &dyn std::fmt::Display| EngineError::ConfigInvalid(e.to_string());
        self.retarget.validate().map_err(|e| invalid(&e))?;
        self.servo.validate().map_err(|e| invalid(&e))?;
        self.camera.validate().map_err(|e| invalid(&e))?;
        let c = &self.calibration;
        if c.ransac_iterations == 0 || !(c.ransac_threshold > 0.0) || c.min_samples < 2 || !(c.min_extent > 0.0) {
            return Err(EngineError::ConfigInvalid("calibration settings out of range".into()));
        }
        for (path, what) in [(&self.record, "record"), (&self.report, "report"), (&self.log, "log")] {
            if let Some(p) = path {
                check_writable(p, what)?;
            }
        }
        Ok(())
    }
}
