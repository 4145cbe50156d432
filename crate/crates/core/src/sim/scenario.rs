use serde::{Deserialize, Serialize};

use super::{ArmState, SimError};
use crate::geometry::{RigidTransform, RotationMatrix, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    PegInHole,
    PickPlace,
}

impl std::str::FromStr for ScenarioKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "peg_in_hole" => Ok(ScenarioKind::PegInHole),
            "pick_place" => Ok(ScenarioKind::PickPlace),
            other => Err(SimError::UnknownScenario(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub target_pose_w: RigidTransform,
    /// Meters.
    pub position_tolerance: f64,
    /// Radians, between the end-effector and target z-axes.
    pub axis_tolerance: f64,
    /// Where the end effector starts.
    pub start_pose_w: RigidTransform,
}

/// Tool pointing straight down.
fn downward() -> RotationMatrix {
    RotationMatrix::from_euler_angles(std::f64::consts::PI, 0.0, 0.0)
}

impl Scenario {
    /// A peg above a hole with 3 mm clearance: insertion needs the peg tip
    /// within half the clearance and its axis within 5°.
    pub fn peg_in_hole() -> Self {
        Self {
            kind: ScenarioKind::PegInHole,
            target_pose_w: RigidTransform::new(downward(), Vec3::new(0.55, 0.05, 0.12)),
            position_tolerance: 0.0015,
            axis_tolerance: 5f64.to_radians(),
            start_pose_w: RigidTransform::new(downward(), Vec3::new(0.45, -0.03, 0.2)),
        }
    }

    pub fn pick_place() -> Self {
        Self {
            kind: ScenarioKind::PickPlace,
            target_pose_w: RigidTransform::new(downward(), Vec3::new(0.4, 0.2, 0.05)),
            position_tolerance: 0.01,
            axis_tolerance: 10f64.to_radians(),
            start_pose_w: RigidTransform::new(downward(), Vec3::new(0.45, -0.1, 0.25)),
        }
    }

    pub fn from_kind(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::PegInHole => Self::peg_in_hole(),
            ScenarioKind::PickPlace => Self::pick_place(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.position_tolerance > 0.0 && self.axis_tolerance > 0.0) {
            return Err(SimError::InvalidConfig("scenario tolerances must be positive"));
        }
        if !self.target_pose_w.is_finite() || !self.start_pose_w.is_finite() {
            return Err(SimError::InvalidConfig("scenario poses must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub success: bool,
    pub position_error: f64,
    pub axis_error: f64,
}

pub fn check_scenario(state: &ArmState, scenario: &Scenario) -> ScenarioOutcome {
    let position_error = (state.ee_pose_w.translation - scenario.target_pose_w.translation).norm();
    let z = state.ee_pose_w.rotation * Vec3::z();
    let target_z = scenario.target_pose_w.rotation * Vec3::z();
    let axis_error = z.cross(&target_z).norm().atan2(z.dot(&target_z));
    ScenarioOutcome {
        success: position_error < scenario.position_tolerance && axis_error < scenario.axis_tolerance,
        position_error,
        axis_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_target_succeeds_with_zero_error() {
        let sc = Scenario::peg_in_hole();
        let out = check_scenario(&ArmState::at(sc.target_pose_w), &sc);
        assert!(out.success);
        assert_eq!(out.position_error, 0.0);
        assert_eq!(out.axis_error, 0.0);
    }

    #[test]
    fn within_half_clearance_succeeds() {
        let sc = Scenario::peg_in_hole();
        let mut pose = sc.target_pose_w;
        pose.translation.x += 0.0014;
        let out = check_scenario(&ArmState::at(pose), &sc);
        assert!(out.success);
        assert!((out.position_error - 0.0014).abs() < 1e-12);
    }

    #[test]
    fn tilted_ten_degrees_fails() {
        let sc = Scenario::peg_in_hole();
        let tilt = RotationMatrix::from_euler_angles(0.0, 10f64.to_radians(), 0.0);
        let pose = RigidTransform::new(tilt * sc.target_pose_w.rotation, sc.target_pose_w.translation);
        let out = check_scenario(&ArmState::at(pose), &sc);
        assert!(!out.success);
        assert!((out.axis_error.to_degrees() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn spin_about_the_peg_axis_is_ignored() {
        let sc = Scenario::peg_in_hole();
        let spin = nalgebra::Rotation3::from_axis_angle(&nalgebra::Vector3::z_axis(), 1.0);
        let pose = RigidTransform::new(sc.target_pose_w.rotation * spin, sc.target_pose_w.translation);
        assert!(check_scenario(&ArmState::at(pose), &sc).axis_error < 1e-12);
    }

    #[test]
    fn kind_parses_from_cli_names() {
        assert_eq!("peg_in_hole".parse::<ScenarioKind>().unwrap(), ScenarioKind::PegInHole);
        assert!("drawer".parse::<ScenarioKind>().is_err());
    }
}
