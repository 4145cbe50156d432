use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, Mat3, UnitVec3, Vec3};

/// Infinite line through `point` along `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line3 {
    pub point: Vec3,
    pub direction: UnitVec3,
}

impl Line3 {
    pub fn new(point: Vec3, direction: UnitVec3) -> Self {
        Self { point, direction }
    }

    /// Builds a line from two distinct points, directed from `a` to `b`.
    pub fn through(a: &Vec3, b: &Vec3) -> Option<Self> {
        UnitVec3::try_new(b - a, 1e-12).map(|d| Self::new(*a, d))
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        let v = p - self.point;
        (v - self.direction.as_ref() * v.dot(&self.direction)).norm()
    }

    /// Same line with the direction reversed.
    pub fn flipped(&self) -> Self {
        Self::new(self.point, -self.direction)
    }
}

/// Principal-axis fit through the centroid.
///
/// The direction sign is normalized so that its largest-magnitude component is
/// positive; callers that care about orientation (calibration) fix it later.
pub fn fit_line_least_squares(points: &[Vec3]) -> Result<Line3, GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::DegenerateInput("at least 2 points are required"));
    }
    if !points.iter().all(super::is_finite) {
        return Err(GeometryError::DegenerateInput("non-finite point"));
    }
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vec3>() / n;
    let scatter = points.iter().fold(Mat3::zeros(), |acc, p| {
        let d = p - centroid;
        acc + d * d.transpose()
    });

    let eig = SymmetricEigen::new(scatter);
    let (imax, lmax) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, l)| (i, *l))
        .unwrap();
    let extent = points.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
    if lmax <= 0.0 || extent <= 1e-12 * centroid.norm().max(1.0) {
        return Err(GeometryError::DegenerateInput("fewer than 2 distinct points"));
    }

    let mut dir: Vec3 = eig.eigenvectors.column(imax).into_owned();
    let imax_abs = dir.iamax();
    if dir[imax_abs] < 0.0 {
        dir = -dir;
    }
    Ok(Line3::new(centroid, UnitVec3::new_normalize(dir)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Maximum point-to-line distance for an inlier, meters.
    pub inlier_threshold: f64,
    /// Absolute floor on the consensus size.
    pub min_inliers: usize,
    /// Consensus size as a fraction of the sample count; the larger of this
    /// and `min_inliers` is enforced.
    pub min_inlier_fraction: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_threshold: 0.01,
            min_inliers: 10,
            min_inlier_fraction: 0.3,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn required_inliers(&self, n_points: usize) -> usize {
        let frac = (self.min_inlier_fraction * n_points as f64).ceil() as usize;
        self.min_inliers.max(frac)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacFit {
    pub line: Line3,
    pub inlier_mask: Vec<bool>,
}

impl RansacFit {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }

    pub fn inliers<'a>(&'a self, points: &'a [Vec3]) -> impl Iterator<Item = &'a Vec3> + 'a {
        points
            .iter()
            .zip(&self.inlier_mask)
            .filter_map(|(p, &keep)| keep.then_some(p))
    }
}

/// Two-point RANSAC followed by a least-squares refit on the largest
/// consensus set. Ties keep the earliest hypothesis, so a fixed seed gives a
/// bitwise reproducible result.
pub fn ransac_line(points: &[Vec3], cfg: &RansacConfig) -> Result<RansacFit, GeometryError> {
    let required = cfg.required_inliers(points.len());
    if points.len() < required.max(2) {
        return Err(GeometryError::NoConsensus {
            best: 0,
            required,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<Vec<bool>> = None;
    let mut best_count = 0;
    for _ in 0..cfg.iterations {
        let i = rng.random_range(0..points.len());
        let j = rng.random_range(0..points.len() - 1);
        let j = if j >= i { j + 1 } else { j };
        let Some(hypothesis) = Line3::through(&points[i], &points[j]) else {
            continue;
        };
        let mask: Vec<bool> = points
            .iter()
            .map(|p| hypothesis.distance(p) <= cfg.inlier_threshold)
            .collect();
        let count = mask.iter().filter(|&&b| b).count();
        if count > best_count {
            best_count = count;
            best = Some(mask);
        }
    }

    match best {
        Some(mask) if best_count >= required => {
            let inliers: Vec<Vec3> = points
                .iter()
                .zip(&mask)
                .filter_map(|(p, &keep)| keep.then_some(*p))
                .collect();
            let line = fit_line_least_squares(&inliers)?;
            Ok(RansacFit {
                line,
                inlier_mask: mask,
            })
        }
        _ => Err(GeometryError::NoConsensus {
            best: best_count,
            required,
        }),
    }
}

/// Point minimizing the summed squared distance to three lines.
///
/// Solves `Σ (I − d dᵀ) p = Σ (I − d dᵀ) a` for lines `(a, d)`.
pub fn closest_point_to_lines(lines: &[Line3; 3]) -> Result<Vec3, GeometryError> {
    let mut a = Mat3::zeros();
    let mut b = Vec3::zeros();
    for line in lines {
        let d = line.direction.into_inner();
        let proj = Mat3::identity() - d * d.transpose();
        a += proj;
        b += proj * line.point;
    }
    let min_eig = SymmetricEigen::new(a).eigenvalues.min();
    if min_eig.abs() < 1e-10 {
        return Err(GeometryError::Degenerate("lines do not determine a unique closest point"));
    }
    a.cholesky()
        .map(|c| c.solve(&b))
        .ok_or(GeometryError::Degenerate("normal equations are not positive definite"))
}
