use serde::{Deserialize, Serialize};

use super::RetargetConfig;
use crate::hand::{landmark, HandKeypoints2D, HandObservation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    Fast,
    Slow,
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingState {
    pub mode: ScalingMode,
    pub alpha: f64,
}

impl ScalingState {
    pub fn for_mode(mode: ScalingMode, cfg: &RetargetConfig) -> Self {
        let alpha = match mode {
            ScalingMode::Fast => cfg.alpha_fast,
            ScalingMode::Slow => cfg.alpha_slow,
            ScalingMode::Frozen => 0.0,
        };
        Self { mode, alpha }
    }
}

/// Left-hand gestures select the motion scale: a thumb–pinky pinch freezes the
/// arm, a left wrist below the y threshold selects precise motion, anything
/// else (including no left hand) selects fast motion.
pub fn update_scaling(left: Option<&HandObservation>, cfg: &RetargetConfig) -> ScalingState {
    let mode = match left {
        None => ScalingMode::Fast,
        Some(hand) => {
            let pinch = hand
                .keypoints
                .pixel_distance(landmark::THUMB_TIP, landmark::PINKY_TIP);
            if pinch < cfg.pinch_freeze_threshold {
                ScalingMode::Frozen
            } else if hand.wrist_position_c.y < cfg.left_wrist_y_threshold {
                ScalingMode::Slow
            } else {
                ScalingMode::Fast
            }
        }
    };
    ScalingState::for_mode(mode, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperState {
    #[default]
    Open,
    Closed,
}

/// Closes when the right thumb and index tips come within the threshold.
///
/// A band of `gripper_hysteresis` (fraction of the threshold, split evenly
/// around it) keeps the previous state so jitter near the threshold does not
/// toggle the gripper.
pub fn gripper_command(keypoints: &HandKeypoints2D, cfg: &RetargetConfig, previous: GripperState) -> GripperState {
    let d = keypoints.pixel_distance(landmark::THUMB_TIP, landmark::INDEX_TIP);
    let half_band = 0.5 * cfg.gripper_hysteresis * cfg.gripper_close_threshold;
    if d < cfg.gripper_close_threshold - half_band {
        GripperState::Closed
    } else if d > cfg.gripper_close_threshold + half_band {
        GripperState::Open
    } else {
        previous
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RotationMatrix, Vec3};
    use crate::hand::NUM_KEYPOINTS;

    fn hand_with(tip_a: usize, tip_b: usize, distance: f64, wrist_y: f64) -> HandObservation {
        let mut kp = [[200.0, 200.0]; NUM_KEYPOINTS];
        for (i, p) in kp.iter_mut().enumerate() {
            *p = [150.0 + 10.0 * i as f64, 300.0];
        }
        kp[tip_a] = [400.0, 100.0];
        kp[tip_b] = [400.0 + distance, 100.0];
        HandObservation {
            keypoints: HandKeypoints2D(kp),
            wrist_position_c: Vec3::new(-0.2, wrist_y, 0.6),
            wrist_rotation_c: RotationMatrix::identity(),
            confidence: 1.0,
        }
    }

    #[test]
    fn lowered_left_wrist_selects_precise_scale() {
        let cfg = RetargetConfig::default();
        let hand = hand_with(landmark::THUMB_TIP, landmark::PINKY_TIP, 120.0, cfg.left_wrist_y_threshold - 0.05);
        let s = update_scaling(Some(&hand), &cfg);
        assert_eq!(s.mode, ScalingMode::Slow);
        assert_eq!(s.alpha, 0.02);
    }

    #[test]
    fn missing_left_hand_selects_fast_scale() {
        let s = update_scaling(None, &RetargetConfig::default());
        assert_eq!(s.mode, ScalingMode::Fast);
        assert_eq!(s.alpha, 0.3);
    }

    #[test]
    fn raised_left_wrist_selects_fast_scale() {
        let cfg = RetargetConfig::default();
        let hand = hand_with(landmark::THUMB_TIP, landmark::PINKY_TIP, 120.0, cfg.left_wrist_y_threshold + 0.05);
        assert_eq!(update_scaling(Some(&hand), &cfg).alpha, 0.3);
    }

    #[test]
    fn thumb_pinky_pinch_freezes() {
        let cfg = RetargetConfig::default();
        // pinch wins over the wrist height rule
        let hand = hand_with(landmark::THUMB_TIP, landmark::PINKY_TIP, 0.0, cfg.left_wrist_y_threshold - 0.05);
        let s = update_scaling(Some(&hand), &cfg);
        assert_eq!(s.mode, ScalingMode::Frozen);
        assert_eq!(s.alpha, 0.0);
    }

    #[test]
    fn gripper_closes_on_contact_and_opens_when_apart() {
        let cfg = RetargetConfig::default();
        let closed = hand_with(landmark::THUMB_TIP, landmark::INDEX_TIP, 0.0, 0.0);
        assert_eq!(gripper_command(&closed.keypoints, &cfg, GripperState::Open), GripperState::Closed);
        let open = hand_with(landmark::THUMB_TIP, landmark::INDEX_TIP, 3.0 * cfg.gripper_close_threshold, 0.0);
        assert_eq!(gripper_command(&open.keypoints, &cfg, GripperState::Closed), GripperState::Open);
    }

    #[test]
    fn gripper_does_not_chatter_inside_band() {
        let cfg = RetargetConfig::default();
        let th = cfg.gripper_close_threshold;
        let mut state = GripperState::Open;
        for i in 0..40 {
            let d = if i % 2 == 0 { 1.05 * th } else { 0.95 * th };
            state = gripper_command(&hand_with(4, 8, d, 0.0).keypoints, &cfg, state);
            assert_eq!(state, GripperState::Open);
        }
        // leave the band below: closes; oscillate again: stays closed
        state = gripper_command(&hand_with(4, 8, 0.5 * th, 0.0).keypoints, &cfg, state);
        assert_eq!(state, GripperState::Closed);
        for i in 0..40 {
            let d = if i % 2 == 0 { 1.05 * th } else { 0.95 * th };
            state = gripper_command(&hand_with(4, 8, d, 0.0).keypoints, &cfg, state);
            assert_eq!(state, GripperState::Closed);
        }
    }
}
