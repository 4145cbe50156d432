use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{GeometryError, Mat3, UnitVec3, Vec3};

/// Smallest accepted `|det[a_x a_y a_z]|` before a basis counts as coplanar.
pub const DEFAULT_MIN_BASIS_DETERMINANT: f64 = 0.05;

const MIN_DENOMINATOR: f64 = 1e-10;

/// Three non-coplanar unit axes together with the normals of the planes they
/// span pairwise. The normals are computed once here and never set directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObliqueBasis {
    a_x: UnitVec3,
    a_y: UnitVec3,
    a_z: UnitVec3,
    n_yz: Vec3,
    n_xz: Vec3,
    n_xy: Vec3,
}

impl ObliqueBasis {
    pub fn new(a_x: UnitVec3, a_y: UnitVec3, a_z: UnitVec3) -> Result<Self, GeometryError> {
        Self::with_min_determinant(a_x, a_y, a_z, DEFAULT_MIN_BASIS_DETERMINANT)
    }

    pub fn with_min_determinant(
        a_x: UnitVec3,
        a_y: UnitVec3,
        a_z: UnitVec3,
        min_determinant: f64,
    ) -> Result<Self, GeometryError> {
        let basis = Self {
            a_x,
            a_y,
            a_z,
            n_yz: a_y.cross(&a_z),
            n_xz: a_x.cross(&a_z),
            n_xy: a_x.cross(&a_y),
        };
        if !(basis.determinant().abs() > min_determinant) {
            return Err(GeometryError::Degenerate("oblique axes are nearly coplanar"));
        }
        Ok(basis)
    }

    pub fn orthonormal() -> Self {
        Self::new(Vec3::x_axis(), Vec3::y_axis(), Vec3::z_axis()).expect("identity basis")
    }

    pub fn axes(&self) -> [UnitVec3; 3] {
        [self.a_x, self.a_y, self.a_z]
    }

    pub fn axis(&self, i: usize) -> UnitVec3 {
        self.axes()[i]
    }

    /// Plane normals in `[n_yz, n_xz, n_xy]` order; entry `i` is orthogonal to
    /// every axis except axis `i`.
    pub fn normals(&self) -> [Vec3; 3] {
        [self.n_yz, self.n_xz, self.n_xy]
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::from_columns(&[*self.a_x, *self.a_y, *self.a_z])
    }

    pub fn determinant(&self) -> f64 {
        self.a_x.dot(&self.n_yz)
    }

    /// Point with the given measure numbers, `Σ m_i a_i`.
    pub fn compose(&self, m: &Vec3) -> Vec3 {
        self.a_x.as_ref() * m.x + self.a_y.as_ref() * m.y + self.a_z.as_ref() * m.z
    }
}

/// Measure numbers of `p` along each oblique axis, found by projecting parallel
/// to the plane of the other two axes: `m_i = ⟨p, n_jk⟩ / ⟨a_i, n_jk⟩`.
pub fn oblique_measures(p: &Vec3, basis: &ObliqueBasis) -> Result<Vec3, GeometryError> {
    let mut m = Vec3::zeros();
    for (i, (axis, normal)) in basis.axes().iter().zip(basis.normals()).enumerate() {
        let denom = axis.dot(&normal);
        if denom.abs() < MIN_DENOMINATOR {
            return Err(GeometryError::Degenerate("oblique axis lies in the plane of the others"));
        }
        m[i] = p.dot(&normal) / denom;
    }
    Ok(m)
}

#[derive(Serialize, Deserialize)]
struct ObliqueBasisRepr {
    ax: [f64; 3],
    ay: [f64; 3],
    az: [f64; 3],
}

impl Serialize for ObliqueBasis {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let arr = |v: &UnitVec3| [v.x, v.y, v.z];
        ObliqueBasisRepr {
            ax: arr(&self.a_x),
            ay: arr(&self.a_y),
            az: arr(&self.a_z),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ObliqueBasis {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = ObliqueBasisRepr::deserialize(deserializer)?;
        let unit = |a: [f64; 3]| {
            let v = Vec3::from(a);
            if (v.norm() - 1.0).abs() > 1e-9 {
                return Err(serde::de::Error::custom("oblique axis is not unit length"));
            }
            Ok(UnitVec3::new_unchecked(v))
        };
        ObliqueBasis::new(unit(repr.ax)?, unit(repr.ay)?, unit(repr.az)?).map_err(serde::de::Error::custom)
    }
}
