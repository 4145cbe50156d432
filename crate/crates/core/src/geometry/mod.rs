//! 3D geometry kernel: vectors, rotations, rigid transforms, line fitting,
//! nearest-rotation projection and oblique-coordinate measure numbers.
//!
//! Everything here is a pure function over immutable values. Units are meters
//! and radians throughout.

mod line;
mod oblique;
mod rotation;
mod transform;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use thiserror::Error;

pub use line::{closest_point_to_lines, fit_line_least_squares, ransac_line, Line3, RansacConfig, RansacFit};
pub use oblique::{oblique_measures, ObliqueBasis, DEFAULT_MIN_BASIS_DETERMINANT};
pub use rotation::{geodesic_distance, is_rotation, nearest_rotation, rotation_from_row_major, rotation_to_row_major};
pub use transform::RigidTransform;

pub type Vec3 = Vector3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;
pub type RotationMatrix = Rotation3<f64>;
pub type Mat3 = Matrix3<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("no consensus: best set has {best} inliers, {required} required")]
    NoConsensus { best: usize, required: usize },
    #[error("nearest rotation is not unique (singular values {singular_values:?})")]
    IllConditioned { singular_values: [f64; 3] },
    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),
}

pub(crate) fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}
