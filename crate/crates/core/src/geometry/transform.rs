use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{rotation_from_row_major, rotation_to_row_major, RotationMatrix, Vec3};

/// Pose of a child frame expressed in a parent frame.
///
/// `apply` maps child-frame coordinates into the parent frame:
/// `p_parent = rotation * p_child + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: RotationMatrix, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(RotationMatrix::identity(), Vec3::zeros())
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(RotationMatrix::identity(), translation)
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rotation = self.rotation.inverse();
        RigidTransform {
            rotation,
            translation: -(rotation * self.translation),
        }
    }

    pub fn apply(&self, point: &Vec3) -> Vec3 {
        self.rotation * point + self.translation
    }

    /// Rotates a free vector; translation does not act on displacements.
    pub fn apply_vector(&self, vector: &Vec3) -> Vec3 {
        self.rotation * vector
    }

    pub fn is_finite(&self) -> bool {
        super::is_finite(&self.translation) && self.rotation.matrix().iter().all(|v| v.is_finite())
    }
}

#[derive(Serialize, Deserialize)]
struct RigidTransformRepr {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RigidTransformRepr {
            rotation: rotation_to_row_major(&self.rotation),
            translation: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = RigidTransformRepr::deserialize(deserializer)?;
        let rotation = rotation_from_row_major(&repr.rotation, 1e-6).map_err(serde::de::Error::custom)?;
        Ok(RigidTransform::new(rotation, Vec3::from(repr.translation)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use std::f64::consts::FRAC_PI_2;

    fn sample() -> RigidTransform {
        RigidTransform::new(
            RotationMatrix::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::new(0.3, -0.5, 0.8)), 1.1)
                .into(),
            Vec3::new(0.2, -1.5, 3.0),
        )
    }

    #[test]
    fn invert_identity_is_identity() {
        assert_eq!(RigidTransform::identity().inverse(), RigidTransform::identity());
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = sample();
        let id = t.compose(&t.inverse());
        assert!((id.rotation.matrix() - nalgebra::Matrix3::identity()).abs().max() < 1e-12);
        assert!(id.translation.norm() < 1e-12);
    }

    #[test]
    fn quarter_turn_about_z_then_shift() {
        // [0 -1 0; 1 0 0; 0 0 1]·(1,0,0) + (1,0,0) = (0,1,0) + (1,0,0)
        let t = RigidTransform::new(
            RotationMatrix::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2),
            Vec3::new(1.0, 0.0, 0.0),
        );
        let p = t.apply(&Vec3::new(1.0, 0.0, 0.0));
        assert!((p - Vec3::new(1.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn apply_inverse_round_trip() {
        let t = sample();
        let p = Vec3::new(-0.4, 0.9, 2.5);
        let back = t.inverse().apply(&t.apply(&p));
        assert!((back - p).norm() < 1e-12);
    }

    #[test]
    fn serde_uses_row_major_layout() {
        let t = RigidTransform::new(
            RotationMatrix::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2),
            Vec3::new(1.0, 2.0, 3.0),
        );
        let json = serde_json::to_value(t).unwrap();
        let rot: Vec<f64> = serde_json::from_value(json["rotation"].clone()).unwrap();
        // row 0 of a +90° z rotation is (0, -1, 0)
        assert!(rot[0].abs() < 1e-15 && (rot[1] + 1.0).abs() < 1e-15);
        let back: RigidTransform = serde_json::from_value(json).unwrap();
        assert_eq!(back, t);
    }
}
