//! Wire messages. Every message is one JSON object per line with a `type`
//! field; hand frames carry the hand-stream fields alongside it.

use serde::{Deserialize, Serialize};

use retarget_core::calibration::{Axis, CalibrationError, OperatorFrames, QualityReport};
use retarget_core::hand::{CameraIntrinsics, HandFrame};
use retarget_core::retarget::{GripperState, RetargetError, ScalingMode};
use retarget_core::sim::Scenario;
use retarget_core::RigidTransform;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    HandFrame(HandFrame),
    CalibControl(CalibControl),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum CalibControl {
    BeginAxis { axis: Axis },
    EndAxis,
    Finish,
}

impl ClientMessage {
    /// Parses a wire line. Lines without a `type` field are read as plain
    /// hand-stream frames.
    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        let value: serde_json::Value = serde_json::from_str(line)?;
        if value.get("type").is_some() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(ClientMessage::HandFrame)
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("client messages serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum CalibrationPhase {
    Uncalibrated,
    Collecting { axis: Axis },
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmWire {
    pub pose: RigidTransform,
    pub gripper: GripperState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineStateMessage {
    pub t: f64,
    pub arm: ArmWire,
    pub commanded_pose: Option<RigidTransform>,
    pub alpha: f64,
    pub scaling_mode: ScalingMode,
    pub engaged: bool,
    pub calibration_phase: CalibrationPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    ParseError,
    InvalidFrame,
    TimestampRegression,
    NotCalibrated,
    Protocol,
    MissingAxis,
    DuplicateAxis,
    SweepDegenerate,
    AxesNearParallel,
    AxesNearCoplanar,
    Geometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMessage {
    pub code: ErrorCode,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub axis: Option<Axis>,
}

impl ErrorMessage {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            axis: None,
        }
    }
}

impl From<&CalibrationError> for ErrorMessage {
    fn from(e: &CalibrationError) -> Self {
        let (code, axis) = match e {
            CalibrationError::SweepDegenerate { axis, .. } => (ErrorCode::SweepDegenerate, Some(*axis)),
            CalibrationError::AxesNearCoplanar { .. } => (ErrorCode::AxesNearCoplanar, None),
            CalibrationError::AxesNearParallel { .. } => (ErrorCode::AxesNearParallel, None),
            CalibrationError::MissingAxis(axis) => (ErrorCode::MissingAxis, Some(*axis)),
            CalibrationError::DuplicateAxis(axis) => (ErrorCode::DuplicateAxis, Some(*axis)),
            CalibrationError::Geometry(_) => (ErrorCode::Geometry, None),
        };
        Self {
            code,
            message: e.to_string(),
            axis,
        }
    }
}

impl From<&RetargetError> for ErrorMessage {
    fn from(e: &RetargetError) -> Self {
        let code = match e {
            RetargetError::NotCalibrated => ErrorCode::NotCalibrated,
            RetargetError::InvalidConfig(_) => ErrorCode::Protocol,
            RetargetError::Geometry(_) => ErrorCode::Geometry,
        };
        Self::new(code, e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMessage {
    pub frames: OperatorFrames,
    pub report: QualityReport,
}

/// Sent once to each client on connect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionMessage {
    pub scenario: Scenario,
    pub camera: CameraIntrinsics,
    pub tick: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Session(SessionMessage),
    EngineState(EngineStateMessage),
    Calibration(Box<CalibrationMessage>),
    Error(ErrorMessage),
}

impl ServerMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_messages_have_flat_layout() {
        let m = ClientMessage::CalibControl(CalibControl::BeginAxis { axis: Axis::Y });
        assert_eq!(m.to_line(), r#"{"type":"calib_control","action":"begin_axis","axis":"Y"}"#);
        let m = ClientMessage::CalibControl(CalibControl::Finish);
        assert_eq!(m.to_line(), r#"{"type":"calib_control","action":"finish"}"#);
        assert_eq!(ClientMessage::parse(r#"{"type":"calib_control","action":"end_axis"}"#).unwrap(), ClientMessage::CalibControl(CalibControl::EndAxis));
    }

    #[test]
    fn hand_frames_parse_with_or_without_type() {
        let tagged = ClientMessage::parse(r#"{"type":"hand_frame","t":1.5,"right":null,"left":null}"#).unwrap();
        let plain = ClientMessage::parse(r#"{"t":1.5,"right":null,"left":null}"#).unwrap();
        assert_eq!(tagged, plain);
        assert_eq!(tagged, ClientMessage::HandFrame(HandFrame::new(1.5)));
        assert_eq!(tagged.to_line(), r#"{"type":"hand_frame","t":1.5,"right":null,"left":null}"#);
    }

    #[test]
    fn unknown_type_is_rejected() {
        assert!(ClientMessage::parse(r#"{"type":"teleport"}"#).is_err());
        assert!(ClientMessage::parse("[1,2]").is_err());
    }

    #[test]
    fn missing_axis_error_names_the_axis() {
        let m = ServerMessage::Error((&CalibrationError::MissingAxis(Axis::Z)).into());
        let v: serde_json::Value = serde_json::from_str(&m.to_line()).unwrap();
        assert_eq!(v["type"], "error");
        assert_eq!(v["code"], "missing_axis");
        assert_eq!(v["axis"], "Z");
    }

    #[test]
    fn engine_state_layout() {
        let m = ServerMessage::EngineState(EngineStateMessage {
            t: 0.01,
            arm: ArmWire {
                pose: RigidTransform::identity(),
                gripper: GripperState::Open,
            },
            commanded_pose: None,
            alpha: 0.3,
            scaling_mode: ScalingMode::Fast,
            engaged: false,
            calibration_phase: CalibrationPhase::Collecting { axis: Axis::X },
        });
        let v: serde_json::Value = serde_json::from_str(&m.to_line()).unwrap();
        assert_eq!(v["type"], "engine_state");
        assert_eq!(v["arm"]["gripper"], "open");
        assert_eq!(v["arm"]["pose"]["translation"], serde_json::json!([0.0, 0.0, 0.0]));
        assert_eq!(v["scaling_mode"], "fast");
        assert_eq!(v["calibration_phase"], serde_json::json!({"state": "collecting", "axis": "X"}));
        let back: ServerMessage = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }
}
