//! Motion retargeting from tracked human hands to robot end-effector commands.
//!
//! The pipeline is: [`hand`] observations → operator frames from
//! [`calibration`] → per-tick [`retarget`] step (Cartesian or oblique mapping,
//! dynamic motion scaling, clutching) → desired end-effector pose and gripper
//! state, which [`sim`] feeds into a rate-limited, latency-delayed servo.

pub mod calibration;
pub mod geometry;
pub mod hand;
pub mod retarget;
pub mod sim;

pub use geometry::{RigidTransform, RotationMatrix, UnitVec3, Vec3};
