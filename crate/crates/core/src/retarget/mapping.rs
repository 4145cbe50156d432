use super::{EngagementState, MappingMode, RetargetConfig};
use crate::calibration::OperatorFrames;
use crate::geometry::{is_rotation, nearest_rotation, oblique_measures, GeometryError, RigidTransform, RotationMatrix, Vec3};
use crate::hand::HandObservation;

/// Returns `r` unchanged when it is a rotation to 1e-12, its nearest rotation
/// otherwise.
pub(crate) fn sanitize_rotation(r: &RotationMatrix) -> RotationMatrix {
    if is_rotation(r.matrix(), 1e-12) {
        *r
    } else {
        nearest_rotation(r.matrix()).unwrap_or(*r)
    }
}

/// Wrist orientation bridged into the world: `R^{w,wcf} · R^{cf,c} · R^{c,wr}`.
fn bridged_rotation(wrist_rot_c: &RotationMatrix, frames: &OperatorFrames, cfg: &RetargetConfig) -> RotationMatrix {
    cfg.wcf_pose.rotation * frames.cartesian.rotation.inverse() * sanitize_rotation(wrist_rot_c)
}

/// Anchors the map at the current wrist and the given end-effector pose.
///
/// The rotation offset is chosen so that `rotate` returns exactly the
/// reference orientation for the current wrist orientation.
pub fn reengage(
    current: &HandObservation,
    reference_pose_w: &RigidTransform,
    frames: &OperatorFrames,
    cfg: &RetargetConfig,
) -> EngagementState {
    let bridge = bridged_rotation(&current.wrist_rotation_c, frames, cfg);
    EngagementState {
        wrist_origin_c: current.wrist_position_c,
        ee_ref_pose_w: *reference_pose_w,
        rotation_offset: bridge.inverse() * reference_pose_w.rotation,
    }
}

/// Desired end-effector position in the world frame.
///
/// The wrist displacement since engagement is rotated into `{cf}`, read either
/// as Cartesian coordinates or as oblique measure numbers, scaled by `alpha`,
/// and applied along the `{wcf}` axes from the reference position.
pub fn translate(
    wrist_pos_c: &Vec3,
    frames: &OperatorFrames,
    engagement: &EngagementState,
    alpha: f64,
    cfg: &RetargetConfig,
) -> Result<Vec3, GeometryError> {
    let delta_c = wrist_pos_c - engagement.wrist_origin_c;
    let delta_cf = frames.cartesian.rotation.inverse() * delta_c;
    let m = match cfg.mode {
        MappingMode::Cartesian => delta_cf,
        MappingMode::Oblique => oblique_measures(&delta_cf, &frames.oblique)?,
    };
    Ok(engagement.ee_ref_pose_w.translation + cfg.wcf_pose.rotation * (m * alpha))
}

/// Desired end-effector orientation in the world frame. Always uses the
/// Cartesian operator frame; the oblique basis only applies to positions.
pub fn rotate(
    wrist_rot_c: &RotationMatrix,
    frames: &OperatorFrames,
    engagement: &EngagementState,
    cfg: &RetargetConfig,
) -> RotationMatrix {
    let r = bridged_rotation(wrist_rot_c, frames, cfg) * engagement.rotation_offset;
    sanitize_rotation(&r)
}
