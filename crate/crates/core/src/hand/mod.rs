//! Hand observation data contract: the 21-landmark keypoint schema, wrist pose
//! in the operator camera frame, camera models for recovering wrist depth, and
//! the JSON Lines stream used for recording, replay and the live socket.

mod camera;
mod stream;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{rotation_from_row_major, rotation_to_row_major, RotationMatrix, Vec3};

pub use camera::{
    calibrate_weak_perspective_constant, deproject, keypoint_bbox, project, weak_perspective_depth,
    wrist_depth_from_map, CameraError, CameraIntrinsics, DepthMap, PixelRect,
};
pub use stream::{read_frames, write_frames, FrameReader, FrameWriter, StreamError};

pub const NUM_KEYPOINTS: usize = 21;

/// Landmark indices of the standard 21-point hand topology.
pub mod landmark {
    pub const WRIST: usize = 0;
    pub const THUMB_TIP: usize = 4;
    pub const INDEX_TIP: usize = 8;
    pub const MIDDLE_TIP: usize = 12;
    pub const RING_TIP: usize = 16;
    pub const PINKY_TIP: usize = 20;
}

/// Rotation matrices read from a stream may carry estimator rounding; they are
/// accepted within this tolerance and re-projected downstream when needed.
pub const ROTATION_READ_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservationError {
    #[error("wrist position is not finite")]
    NonFinitePosition,
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("wrist rotation is not a valid rotation matrix")]
    Rotation,
    #[error("keypoint {0} is not finite")]
    Keypoint(usize),
}

/// 21 image-space landmarks, `(u, v)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HandKeypoints2D(pub [[f64; 2]; NUM_KEYPOINTS]);

impl HandKeypoints2D {
    pub fn point(&self, index: usize) -> [f64; 2] {
        self.0[index]
    }

    pub fn pixel_distance(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.0[a], self.0[b]);
        (pa[0] - pb[0]).hypot(pa[1] - pb[1])
    }

    /// All points inside the image extended by 20% on every side.
    pub fn within_image(&self, intr: &CameraIntrinsics) -> bool {
        let (mu, mv) = (0.2 * intr.width, 0.2 * intr.height);
        self.0
            .iter()
            .all(|[u, v]| *u >= -mu && *u <= intr.width + mu && *v >= -mv && *v <= intr.height + mv)
    }
}

/// One tracked hand: landmarks plus wrist pose in the camera frame `{c}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandObservation {
    pub keypoints: HandKeypoints2D,
    pub wrist_position_c: Vec3,
    pub wrist_rotation_c: RotationMatrix,
    pub confidence: f64,
}

impl HandObservation {
    pub fn validate(&self) -> Result<(), ObservationError> {
        if !self.wrist_position_c.iter().all(|v| v.is_finite()) {
            return Err(ObservationError::NonFinitePosition);
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(ObservationError::Confidence(self.confidence));
        }
        if !crate::geometry::is_rotation(self.wrist_rotation_c.matrix(), ROTATION_READ_TOLERANCE) {
            return Err(ObservationError::Rotation);
        }
        if let Some(i) = self.keypoints.0.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(ObservationError::Keypoint(i));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct HandObservationRepr {
    kp: HandKeypoints2D,
    p: [f64; 3],
    r: [f64; 9],
    conf: f64,
}

impl Serialize for HandObservation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let p = &self.wrist_position_c;
        HandObservationRepr {
            kp: self.keypoints,
            p: [p.x, p.y, p.z],
            r: rotation_to_row_major(&self.wrist_rotation_c),
            conf: self.confidence,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HandObservation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = HandObservationRepr::deserialize(deserializer)?;
        let rotation =
            rotation_from_row_major(&repr.r, ROTATION_READ_TOLERANCE).map_err(serde::de::Error::custom)?;
        let obs = HandObservation {
            keypoints: repr.kp,
            wrist_position_c: Vec3::from(repr.p),
            wrist_rotation_c: rotation,
            confidence: repr.conf,
        };
        obs.validate().map_err(serde::de::Error::custom)?;
        Ok(obs)
    }
}

/// A timestamped pair of optional hand observations; the engine's only input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandFrame {
    pub t: f64,
    pub right: Option<HandObservation>,
    pub left: Option<HandObservation>,
}

impl HandFrame {
    pub fn new(t: f64) -> Self {
        Self {
            t,
            right: None,
            left: None,
        }
    }

    pub fn with_right(mut self, obs: HandObservation) -> Self {
        self.right = Some(obs);
        self
    }

    pub fn with_left(mut self, obs: HandObservation) -> Self {
        self.left = Some(obs);
        self
    }
}

/// Plausible keypoints for a virtual hand: the wrist at `wrist_px`, fingers
/// fanning upward, thumb–index and thumb–pinky tip distances as given.
pub fn synthetic_keypoints(wrist_px: [f64; 2], thumb_index_px: f64, thumb_pinky_px: f64) -> HandKeypoints2D {
    let [u, v] = wrist_px;
    let thumb = [u - 45.0, v - 70.0];
    let mut tips = [[0.0; 2]; 5];
    tips[0] = thumb;
    tips[1] = [thumb[0] + thumb_index_px, thumb[1]];
    tips[4] = [thumb[0] + 0.94 * thumb_pinky_px, thumb[1] + 0.34 * thumb_pinky_px];
    tips[2] = [0.5 * (tips[1][0] + tips[4][0]) + 5.0, 0.5 * (tips[1][1] + tips[4][1]) - 15.0];
    tips[3] = [0.5 * (tips[2][0] + tips[4][0]), 0.5 * (tips[2][1] + tips[4][1]) - 5.0];

    let mut kp = [[u, v]; NUM_KEYPOINTS];
    for (finger, tip) in tips.iter().enumerate() {
        for joint in 1..=4 {
            let s = joint as f64 / 4.0;
            kp[4 * finger + joint] = [u + s * (tip[0] - u), v + s * (tip[1] - v)];
        }
    }
    HandKeypoints2D(kp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn observation() -> HandObservation {
        let mut kp = [[0.0; 2]; NUM_KEYPOINTS];
        for (i, p) in kp.iter_mut().enumerate() {
            *p = [300.0 + i as f64, 200.0 - 0.5 * i as f64];
        }
        HandObservation {
            keypoints: HandKeypoints2D(kp),
            wrist_position_c: Vec3::new(0.01, -0.02, 0.6),
            wrist_rotation_c: RotationMatrix::from_euler_angles(0.1, 0.2, 0.3),
            confidence: 0.9,
        }
    }

    #[test]
    fn wire_keys_follow_schema() {
        let frame = HandFrame::new(1.5).with_right(observation());
        let v = serde_json::to_value(frame).unwrap();
        assert_eq!(v["t"], 1.5);
        assert!(v["left"].is_null());
        assert_eq!(v["right"]["kp"].as_array().unwrap().len(), 21);
        assert_eq!(v["right"]["r"].as_array().unwrap().len(), 9);
        assert_eq!(v["right"]["conf"], 0.9);
    }

    #[test]
    fn rejects_bad_confidence_and_rotation() {
        let mut v = serde_json::to_value(HandFrame::new(0.0).with_right(observation())).unwrap();
        v["right"]["conf"] = serde_json::json!(1.5);
        assert!(serde_json::from_value::<HandFrame>(v.clone()).is_err());
        v["right"]["conf"] = serde_json::json!(0.5);
        v["right"]["r"] = serde_json::json!([2, 0, 0, 0, 1, 0, 0, 0, 1]);
        assert!(serde_json::from_value::<HandFrame>(v).is_err());
    }

    #[test]
    fn keypoint_distance_and_bounds() {
        let obs = observation();
        let d = obs.keypoints.pixel_distance(landmark::THUMB_TIP, landmark::INDEX_TIP);
        assert!((d - (16.0f64 + 4.0).sqrt()).abs() < 1e-12);
        let intr = CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0, 640.0, 480.0).unwrap();
        assert!(obs.keypoints.within_image(&intr));
        let mut far = obs.keypoints;
        far.0[3] = [900.0, 0.0];
        assert!(!far.within_image(&intr));
    }

    #[test]
    fn synthetic_keypoints_hit_requested_distances() {
        let kp = synthetic_keypoints([320.0, 300.0], 55.0, 80.0);
        assert!((kp.pixel_distance(landmark::THUMB_TIP, landmark::INDEX_TIP) - 55.0).abs() < 1e-9);
        assert!((kp.pixel_distance(landmark::THUMB_TIP, landmark::PINKY_TIP) - 80.0 * (0.94f64.powi(2) + 0.34f64.powi(2)).sqrt()).abs() < 1e-9);
        assert_eq!(kp.point(landmark::WRIST), [320.0, 300.0]);
    }
}
