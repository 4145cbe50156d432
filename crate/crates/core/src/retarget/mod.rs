//! Per-frame retargeting: hand observations to a desired end-effector pose,
//! gripper state and motion scale.
//!
//! Every scale change (and every reappearance of the right hand) re-anchors
//! the map: the current wrist position becomes the new origin and the last
//! commanded pose becomes the new reference, so the commanded pose never
//! jumps when the operator clutches.

mod mapping;
mod scaling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::OperatorFrames;
use crate::geometry::{GeometryError, RigidTransform, RotationMatrix, Vec3};
use crate::hand::HandFrame;

pub use mapping::{reengage, rotate, translate};
pub use scaling::{gripper_command, update_scaling, GripperState, ScalingMode, ScalingState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetargetError {
    #[error("operator frames are not calibrated")]
    NotCalibrated,
    #[error("invalid retarget configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingMode {
    Cartesian,
    #[default]
    Oblique,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetargetConfig {
    pub alpha_fast: f64,
    pub alpha_slow: f64,
    /// Left wrist `y` in the camera frame below which precise scaling applies, meters.
    pub left_wrist_y_threshold: f64,
    /// Left thumb–pinky pixel distance below which the arm freezes.
    pub pinch_freeze_threshold: f64,
    /// Right thumb–index pixel distance below which the gripper closes.
    pub gripper_close_threshold: f64,
    /// Width of the gripper hysteresis band as a fraction of the threshold.
    pub gripper_hysteresis: f64,
    pub mode: MappingMode,
    /// Pose of the wrist camera frame `{wcf}` in the world frame.
    pub wcf_pose: RigidTransform,
}

impl Default for RetargetConfig {
    fn default() -> Self {
        Self {
            alpha_fast: 0.3,
            alpha_slow: 0.02,
            left_wrist_y_threshold: 0.0,
            pinch_freeze_threshold: 25.0,
            gripper_close_threshold: 30.0,
            gripper_hysteresis: 0.2,
            mode: MappingMode::Oblique,
            wcf_pose: RigidTransform::identity(),
        }
    }
}

impl RetargetConfig {
    pub fn validate(&self) -> Result<(), RetargetError> {
        if !(0.0 < self.alpha_slow && self.alpha_slow < self.alpha_fast && self.alpha_fast <= 1.0) {
            return Err(RetargetError::InvalidConfig("require 0 < alpha_slow < alpha_fast <= 1"));
        }
        if !(self.pinch_freeze_threshold > 0.0 && self.gripper_close_threshold > 0.0) {
            return Err(RetargetError::InvalidConfig("pixel thresholds must be positive"));
        }
        if !(0.0..1.0).contains(&self.gripper_hysteresis) {
            return Err(RetargetError::InvalidConfig("gripper hysteresis must be in [0, 1)"));
        }
        if !self.left_wrist_y_threshold.is_finite() || !self.wcf_pose.is_finite() {
            return Err(RetargetError::InvalidConfig("non-finite value"));
        }
        Ok(())
    }
}

/// Clutch anchor, reset on every scale change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngagementState {
    pub wrist_origin_c: Vec3,
    pub ee_ref_pose_w: RigidTransform,
    pub rotation_offset: RotationMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetargetCommand {
    pub desired_ee_pose_w: RigidTransform,
    pub gripper: GripperState,
    pub alpha_active: f64,
    pub engaged: bool,
}

impl RetargetCommand {
    /// A command that keeps the arm where it is.
    pub fn hold(pose: RigidTransform, gripper: GripperState) -> Self {
        Self {
            desired_ee_pose_w: pose,
            gripper,
            alpha_active: 0.0,
            engaged: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetargetState {
    pub scaling: ScalingState,
    pub engagement: Option<EngagementState>,
    pub last_command: Option<RetargetCommand>,
    pub gripper: GripperState,
}

impl RetargetState {
    pub fn new(cfg: &RetargetConfig) -> Self {
        Self {
            scaling: ScalingState::for_mode(ScalingMode::Fast, cfg),
            engagement: None,
            last_command: None,
            gripper: GripperState::Open,
        }
    }
}

/// One control tick. Pure: the same inputs always give the same outputs.
///
/// - The scale is re-evaluated from the left hand.
/// - Without a right hand the last command is held and the clutch released.
/// - On first contact, a scale change, or the right hand reappearing, the map
///   is re-anchored and this tick's command equals the reference pose.
/// - While frozen the last pose is held.
///
/// The reference pose is the last commanded pose, or `arm_pose_w` before any
/// command exists.
pub fn step(
    cfg: &RetargetConfig,
    frames: Option<&OperatorFrames>,
    state: &RetargetState,
    frame: &HandFrame,
    arm_pose_w: &RigidTransform,
) -> Result<(RetargetCommand, RetargetState), RetargetError> {
    let frames = frames.ok_or(RetargetError::NotCalibrated)?;
    let scaling = update_scaling(frame.left.as_ref(), cfg);
    let scale_changed = scaling.mode != state.scaling.mode;
    let reference = state
        .last_command
        .map(|c| c.desired_ee_pose_w)
        .unwrap_or(*arm_pose_w);

    let mut next = RetargetState {
        scaling,
        ..*state
    };

    let (pose, engaged) = match &frame.right {
        None => {
            next.engagement = None;
            (reference, false)
        }
        Some(right) => {
            next.gripper = gripper_command(&right.keypoints, cfg, state.gripper);
            let active = scaling.mode != ScalingMode::Frozen;
            match state.engagement {
                Some(engagement) if !scale_changed => {
                    if active {
                        let position = translate(&right.wrist_position_c, frames, &engagement, scaling.alpha, cfg)?;
                        let rotation = rotate(&right.wrist_rotation_c, frames, &engagement, cfg);
                        (RigidTransform::new(rotation, position), true)
                    } else {
                        (reference, false)
                    }
                }
                _ => {
                    next.engagement = Some(reengage(right, &reference, frames, cfg));
                    (reference, active)
                }
            }
        }
    };

    let command = RetargetCommand {
        desired_ee_pose_w: pose,
        gripper: next.gripper,
        alpha_active: scaling.alpha,
        engaged,
    };
    next.last_command = Some(command);
    Ok((command, next))
}

/// Owns the retargeting state for a single engine loop.
#[derive(Debug, Clone)]
pub struct Retargeter {
    cfg: RetargetConfig,
    frames: Option<OperatorFrames>,
    state: RetargetState,
}

impl Retargeter {
    pub fn new(cfg: RetargetConfig) -> Result<Self, RetargetError> {
        cfg.validate()?;
        Ok(Self {
            state: RetargetState::new(&cfg),
            cfg,
            frames: None,
        })
    }

    pub fn with_frames(cfg: RetargetConfig, frames: OperatorFrames) -> Result<Self, RetargetError> {
        let mut r = Self::new(cfg)?;
        r.frames = Some(frames);
        Ok(r)
    }

    /// Installs new frames and drops the clutch so the next tick re-anchors.
    pub fn set_frames(&mut self, frames: OperatorFrames) {
        self.frames = Some(frames);
        self.state.engagement = None;
    }

    pub fn frames(&self) -> Option<&OperatorFrames> {
        self.frames.as_ref()
    }

    pub fn config(&self) -> &RetargetConfig {
        &self.cfg
    }

    pub fn state(&self) -> &RetargetState {
        &self.state
    }

    pub fn step(&mut self, frame: &HandFrame, arm_pose_w: &RigidTransform) -> Result<RetargetCommand, RetargetError> {
        let (command, next) = step(&self.cfg, self.frames.as_ref(), &self.state, frame, arm_pose_w)?;
        self.state = next;
        Ok(command)
    }
}
