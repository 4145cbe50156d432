use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{geodesic_distance, RigidTransform};
use crate::retarget::{GripperState, RetargetCommand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServoConfig {
    /// m/s; may be infinite.
    pub max_linear_speed: f64,
    /// rad/s; may be infinite.
    pub max_angular_speed: f64,
    /// Seconds between issuing a command and the servo acting on it.
    pub command_latency: f64,
    pub tick: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        Self {
            max_linear_speed: 0.15,
            max_angular_speed: 1.0,
            command_latency: 0.4,
            tick: 0.01,
        }
    }
}

impl ServoConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.tick > 0.0 && self.tick.is_finite()) {
            return Err(SimError::InvalidConfig("tick must be positive and finite"));
        }
        if !(self.max_linear_speed > 0.0 && self.max_angular_speed > 0.0) {
            return Err(SimError::InvalidConfig("speed limits must be positive"));
        }
        if !(self.command_latency >= 0.0 && self.command_latency.is_finite()) {
            return Err(SimError::InvalidConfig("latency must be non-negative and finite"));
        }
        Ok(())
    }

    /// Length of the delay line in ticks.
    pub fn delay_ticks(&self) -> usize {
        (self.command_latency / self.tick).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub ee_pose_w: RigidTransform,
    pub gripper: GripperState,
    pub time: f64,
}

impl ArmState {
    pub fn at(ee_pose_w: RigidTransform) -> Self {
        Self {
            ee_pose_w,
            gripper: GripperState::Open,
            time: 0.0,
        }
    }
}

/// Moves `state` one tick toward `target`: straight-line translation and
/// geodesic rotation, each clipped to its speed limit. The gripper follows
/// the target immediately. No delay is applied here.
pub fn servo_step(state: &ArmState, target: &RetargetCommand, cfg: &ServoConfig) -> ArmState {
    let goal = &target.desired_ee_pose_w;
    let current = &state.ee_pose_w;

    let max_step = cfg.max_linear_speed * cfg.tick;
    let delta = goal.translation - current.translation;
    let distance = delta.norm();
    let translation = if distance <= max_step {
        goal.translation
    } else {
        current.translation + delta * (max_step / distance)
    };

    let max_turn = cfg.max_angular_speed * cfg.tick;
    let angle = geodesic_distance(&current.rotation, &goal.rotation);
    let rotation = if angle <= max_turn {
        goal.rotation
    } else {
        let relative = goal.rotation * current.rotation.inverse();
        let axis_angle = relative.scaled_axis();
        let scaled = axis_angle * (max_turn / axis_angle.norm());
        nalgebra::Rotation3::new(scaled) * current.rotation
    };

    ArmState {
        ee_pose_w: RigidTransform::new(rotation, translation),
        gripper: target.gripper,
        time: state.time + cfg.tick,
    }
}

/// Simulated end effector: a FIFO delay line in front of the rate-limited
/// servo. Until the first command leaves the delay line the arm holds still.
#[derive(Debug, Clone)]
pub struct SimArm {
    cfg: ServoConfig,
    state: ArmState,
    delay_line: VecDeque<RetargetCommand>,
    applied: Option<RetargetCommand>,
}

impl SimArm {
    pub fn new(cfg: ServoConfig, initial: ArmState) -> Result<Self, SimError> {
        cfg.validate()?;
        if !initial.ee_pose_w.is_finite() {
            return Err(SimError::InvalidConfig("initial pose is not finite"));
        }
        Ok(Self {
            delay_line: VecDeque::with_capacity(cfg.delay_ticks() + 1),
            cfg,
            state: initial,
            applied: None,
        })
    }

    pub fn state(&self) -> &ArmState {
        &self.state
    }

    pub fn config(&self) -> &ServoConfig {
        &self.cfg
    }

    /// The command the servo is currently tracking, if any has arrived.
    pub fn applied_command(&self) -> Option<&RetargetCommand> {
        self.applied.as_ref()
    }

    /// Commands still in flight, oldest first.
    pub fn pending(&self) -> impl Iterator<Item = &RetargetCommand> {
        self.delay_line.iter()
    }

    /// Issues `command` and advances one tick.
    pub fn step(&mut self, command: RetargetCommand) -> &ArmState {
        self.delay_line.push_back(command);
        if self.delay_line.len() > self.cfg.delay_ticks() {
            self.applied = self.delay_line.pop_front();
        }
        self.state = match &self.applied {
            Some(target) => servo_step(&self.state, target, &self.cfg),
            None => ArmState {
                time: self.state.time + self.cfg.tick,
                ..self.state
            },
        };
        &self.state
    }

    /// True when every in-flight command and the applied one equal `command`
    /// and the arm has reached it.
    pub fn settled_at(&self, command: &RetargetCommand) -> bool {
        self.applied.as_ref() == Some(command)
            && self.delay_line.iter().all(|c| c == command)
            && self.state.ee_pose_w == command.desired_ee_pose_w
            && self.state.gripper == command.gripper
    }
}
