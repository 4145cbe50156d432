use super::{GeometryError, Mat3, RotationMatrix};

/// Tolerance used to decide that two singular values coincide.
const SINGULAR_VALUE_TIE: f64 = 1e-9;

/// Projects an arbitrary 3×3 matrix onto SO(3), minimizing the Frobenius
/// distance.
///
/// With `M = U Σ Vᵀ`, the minimizer is `U diag(1, 1, d) Vᵀ` where `d` flips the
/// direction belonging to the smallest singular value when `det(U Vᵀ) < 0`.
/// That flip is only well defined when the smallest singular value is strictly
/// below the middle one; otherwise the projection is not unique and
/// `IllConditioned` is returned. Rank < 2 inputs are rejected the same way.
pub fn nearest_rotation(m: &Mat3) -> Result<RotationMatrix, GeometryError> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::DegenerateInput("matrix has non-finite entries"));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(GeometryError::DegenerateInput("SVD did not converge")),
    };
    let s = svd.singular_values;
    let singular_values = [s[0], s[1], s[2]];

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let [largest, middle, smallest] = order;

    let tie = SINGULAR_VALUE_TIE * s[largest].max(1.0);
    if s[middle] <= tie {
        return Err(GeometryError::IllConditioned { singular_values });
    }

    let flip = (u * v_t).determinant() < 0.0;
    if flip && (s[middle] - s[smallest]).abs() <= tie {
        return Err(GeometryError::IllConditioned { singular_values });
    }

    let mut d = nalgebra::Vector3::repeat(1.0);
    if flip {
        d[smallest] = -1.0;
    }
    let r = u * Mat3::from_diagonal(&d) * v_t;
    Ok(RotationMatrix::from_matrix_unchecked(r))
}

/// Checks `RᵀR = I` and `det R = +1`, elementwise within `tol`.
pub fn is_rotation(m: &Mat3, tol: f64) -> bool {
    m.iter().all(|v| v.is_finite())
        && (m.transpose() * m - Mat3::identity()).abs().max() <= tol
        && (m.determinant() - 1.0).abs() <= tol
}

/// Angle of the relative rotation `aᵀ b`, in `[0, π]`.
pub fn geodesic_distance(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    let rel = a.matrix().transpose() * b.matrix();
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    // acos loses precision near zero; recover the small-angle case from the
    // skew part instead.
    let skew = nalgebra::Vector3::new(
        rel[(2, 1)] - rel[(1, 2)],
        rel[(0, 2)] - rel[(2, 0)],
        rel[(1, 0)] - rel[(0, 1)],
    );
    let sin = skew.norm() / 2.0;
    sin.atan2(cos)
}

pub fn rotation_to_row_major(r: &RotationMatrix) -> [f64; 9] {
    let m = r.matrix();
    [
        m[(0, 0)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(1, 1)],
        m[(1, 2)],
        m[(2, 0)],
        m[(2, 1)],
        m[(2, 2)],
    ]
}

/// Builds a rotation from 9 row-major values, keeping the values bit-exact.
/// Fails when the matrix is not a rotation within `tol`.
pub fn rotation_from_row_major(values: &[f64; 9], tol: f64) -> Result<RotationMatrix, GeometryError> {
    let m = Mat3::from_row_slice(values);
    if !is_rotation(&m, tol) {
        return Err(GeometryError::DegenerateInput("matrix is not a rotation"));
    }
    Ok(RotationMatrix::from_matrix_unchecked(m))
}
