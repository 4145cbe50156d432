//! Operator-frame calibration from three wrist sweeps.
//!
//! The operator moves the right wrist once along each intended robot axis. A
//! RANSAC line is fitted to every sweep and oriented by the direction of travel.
//! The nearest rotation to the matrix of the three directions and the point
//! closest to the three lines give the Cartesian operator frame `{cf}` in the
//! camera frame. The raw directions, re-expressed in `{cf}`, give the oblique
//! basis that keeps calibrated motions repeatable.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    closest_point_to_lines, nearest_rotation, ransac_line, GeometryError, Line3, Mat3, ObliqueBasis,
    RansacConfig, RigidTransform, UnitVec3, Vec3,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub t: f64,
    /// Right wrist position in the camera frame, meters.
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSweep {
    pub axis: Axis,
    pub samples: Vec<SweepSample>,
}

impl CalibrationSweep {
    pub fn new(axis: Axis, samples: Vec<SweepSample>) -> Self {
        Self { axis, samples }
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.samples.iter().map(|s| s.position).collect()
    }

    /// Largest pairwise distance between samples.
    pub fn extent(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.samples.iter().enumerate() {
            for b in &self.samples[i + 1..] {
                best = best.max((a.position - b.position).norm());
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig {
    pub ransac: RansacConfig,
    pub min_samples: usize,
    /// Minimum sweep extent, meters.
    pub min_extent: f64,
    /// Pair angles must lie in `[min_pair_angle, 180° − min_pair_angle]`.
    pub min_pair_angle_deg: f64,
    pub min_basis_determinant: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            ransac: RansacConfig::default(),
            min_samples: 30,
            min_extent: 0.15,
            min_pair_angle_deg: 45.0,
            min_basis_determinant: crate::geometry::DEFAULT_MIN_BASIS_DETERMINANT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("sweep {axis} is degenerate: {reason}")]
    SweepDegenerate { axis: Axis, reason: String },
    #[error("axes are nearly coplanar (|det| = {determinant:.4})")]
    AxesNearCoplanar { determinant: f64 },
    #[error("axes {pair} are nearly parallel ({angle_deg:.1}°)")]
    AxesNearParallel { pair: String, angle_deg: f64 },
    #[error("no sweep recorded for axis {0}")]
    MissingAxis(Axis),
    #[error("more than one sweep for axis {0}")]
    DuplicateAxis(Axis),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Angles between the signed sweep directions, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisPairAngles {
    pub xy: f64,
    pub yz: f64,
    pub zx: f64,
}

impl AxisPairAngles {
    pub fn from_directions(d: &[Vec3; 3]) -> Self {
        let angle = |a: &Vec3, b: &Vec3| a.normalize().dot(&b.normalize()).clamp(-1.0, 1.0).acos().to_degrees();
        Self {
            xy: angle(&d[0], &d[1]),
            yz: angle(&d[1], &d[2]),
            zx: angle(&d[2], &d[0]),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> {
        [("XY", self.xy), ("YZ", self.yz), ("ZX", self.zx)].into_iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDiagnostics {
    pub axis_pair_angles: AxisPairAngles,
    /// RMS inlier distance to each fitted line, meters.
    pub residual_rms: [f64; 3],
    /// RMS distance from the frame origin to the three lines, meters.
    pub origin_residual: f64,
    pub basis_determinant: f64,
    pub inlier_counts: [usize; 3],
}

/// Calibrated operator frames.
///
/// `cartesian` is the pose of `{cf}` in the camera frame. `oblique` holds the
/// sweep directions expressed in `{cf}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorFrames {
    pub cartesian: RigidTransform,
    pub oblique: ObliqueBasis,
    pub diagnostics: CalibrationDiagnostics,
}

impl OperatorFrames {
    /// Frames whose axes coincide with the camera axes, anchored at `origin`.
    pub fn aligned_with_camera(origin: Vec3) -> Self {
        Self {
            cartesian: RigidTransform::from_translation(origin),
            oblique: ObliqueBasis::orthonormal(),
            diagnostics: CalibrationDiagnostics {
                axis_pair_angles: AxisPairAngles {
                    xy: 90.0,
                    yz: 90.0,
                    zx: 90.0,
                },
                residual_rms: [0.0; 3],
                origin_residual: 0.0,
                basis_determinant: 1.0,
                inlier_counts: [0; 3],
            },
        }
    }

    /// Sweep direction `i` in the camera frame.
    pub fn camera_direction(&self, axis: Axis) -> Vec3 {
        self.cartesian.rotation * self.oblique.axis(axis.index()).into_inner()
    }
}

fn check_sweep(sweep: &CalibrationSweep, cfg: &CalibrationConfig) -> Result<(), CalibrationError> {
    let degenerate = |reason: String| CalibrationError::SweepDegenerate {
        axis: sweep.axis,
        reason,
    };
    if sweep.samples.len() < cfg.min_samples {
        return Err(degenerate(format!(
            "{} samples, at least {} required",
            sweep.samples.len(),
            cfg.min_samples
        )));
    }
    if sweep.samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(degenerate("timestamps are not strictly increasing".into()));
    }
    if sweep
        .samples
        .iter()
        .any(|s| !s.t.is_finite() || !s.position.iter().all(|v| v.is_finite()))
    {
        return Err(degenerate("non-finite sample".into()));
    }
    let extent = sweep.extent();
    if extent < cfg.min_extent {
        return Err(degenerate(format!(
            "extent {extent:.3} m is below {:.3} m",
            cfg.min_extent
        )));
    }
    Ok(())
}

struct FittedSweep {
    line: Line3,
    residual_rms: f64,
    inliers: usize,
}

fn fit_sweep(sweep: &CalibrationSweep, cfg: &CalibrationConfig) -> Result<FittedSweep, CalibrationError> {
    check_sweep(sweep, cfg)?;
    let points = sweep.positions();
    let ransac_cfg = RansacConfig {
        seed: cfg.ransac.seed.wrapping_add(sweep.axis.index() as u64),
        ..cfg.ransac
    };
    let fit = ransac_line(&points, &ransac_cfg).map_err(|e| CalibrationError::SweepDegenerate {
        axis: sweep.axis,
        reason: e.to_string(),
    })?;

    // Orient along the direction of travel: first to last inlier in time.
    let mut inliers = fit.inliers(&points);
    let first = *inliers.next().expect("consensus set is non-empty");
    let last = inliers.last().copied().unwrap_or(first);
    let line = if (last - first).dot(&fit.line.direction) < 0.0 {
        fit.line.flipped()
    } else {
        fit.line
    };

    let inlier_points: Vec<&Vec3> = fit.inliers(&points).collect();
    let sq: f64 = inlier_points.iter().map(|p| line.distance(p).powi(2)).sum();
    Ok(FittedSweep {
        line,
        residual_rms: (sq / inlier_points.len() as f64).sqrt(),
        inliers: inlier_points.len(),
    })
}

/// Builds the operator frames from exactly one sweep per axis.
pub fn calibrate(sweeps: &[CalibrationSweep], cfg: &CalibrationConfig) -> Result<OperatorFrames, CalibrationError> {
    let mut ordered: [Option<&CalibrationSweep>; 3] = [None; 3];
    for sweep in sweeps {
        let slot = &mut ordered[sweep.axis.index()];
        if slot.is_some() {
            return Err(CalibrationError::DuplicateAxis(sweep.axis));
        }
        *slot = Some(sweep);
    }
    let mut fitted = Vec::with_capacity(3);
    for axis in Axis::ALL {
        let sweep = ordered[axis.index()].ok_or(CalibrationError::MissingAxis(axis))?;
        fitted.push(fit_sweep(sweep, cfg)?);
    }

    let lines = [fitted[0].line, fitted[1].line, fitted[2].line];
    let directions: [Vec3; 3] = lines.map(|l| l.direction.into_inner());

    let angles = AxisPairAngles::from_directions(&directions);
    let lo = cfg.min_pair_angle_deg;
    for (pair, angle) in angles.iter() {
        if angle < lo || angle > 180.0 - lo {
            return Err(CalibrationError::AxesNearParallel {
                pair: pair.to_string(),
                angle_deg: angle,
            });
        }
    }

    let direction_matrix = Mat3::from_columns(&directions);
    let determinant = direction_matrix.determinant();
    if determinant.abs() <= cfg.min_basis_determinant {
        return Err(CalibrationError::AxesNearCoplanar { determinant });
    }

    let rotation = nearest_rotation(&direction_matrix)?;
    let origin = closest_point_to_lines(&lines)?;
    let cartesian = RigidTransform::new(rotation, origin);

    let to_cf = rotation.inverse();
    let axis_in_cf = |d: &Vec3| UnitVec3::new_normalize(to_cf * d);
    let oblique = ObliqueBasis::with_min_determinant(
        axis_in_cf(&directions[0]),
        axis_in_cf(&directions[1]),
        axis_in_cf(&directions[2]),
        cfg.min_basis_determinant,
    )
    .map_err(|_| CalibrationError::AxesNearCoplanar { determinant })?;

    let origin_sq: f64 = lines.iter().map(|l| l.distance(&origin).powi(2)).sum();
    Ok(OperatorFrames {
        cartesian,
        oblique,
        diagnostics: CalibrationDiagnostics {
            axis_pair_angles: angles,
            residual_rms: [fitted[0].residual_rms, fitted[1].residual_rms, fitted[2].residual_rms],
            origin_residual: (origin_sq / 3.0).sqrt(),
            basis_determinant: oblique.determinant(),
            inlier_counts: [fitted[0].inliers, fitted[1].inliers, fitted[2].inliers],
        },
    })
}

/// Thresholds above which the quality report raises a warning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityThresholds {
    pub max_angle_deviation_deg: f64,
    pub min_determinant: f64,
    pub max_residual_rms: f64,
    pub max_origin_residual: f64,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        Self {
            max_angle_deviation_deg: 20.0,
            min_determinant: 0.3,
            max_residual_rms: 0.01,
            max_origin_residual: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QualityWarning {
    SkewedPair { pair: String, angle_deg: f64 },
    NearCoplanar { determinant: f64 },
    NoisySweep { axis: Axis, residual_rms: f64 },
    LinesFarApart { origin_residual: f64 },
}

impl fmt::Display for QualityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QualityWarning::SkewedPair { pair, angle_deg } => {
                write!(f, "axes {pair} meet at {angle_deg:.1}°, far from perpendicular")
            }
            QualityWarning::NearCoplanar { determinant } => {
                write!(f, "axes are close to coplanar (det {determinant:.3})")
            }
            QualityWarning::NoisySweep { axis, residual_rms } => {
                write!(f, "sweep {axis} is noisy ({:.1} mm RMS)", residual_rms * 1e3)
            }
            QualityWarning::LinesFarApart { origin_residual } => {
                write!(f, "sweep lines pass {:.1} mm from the origin", origin_residual * 1e3)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub axis_pair_angles: AxisPairAngles,
    pub residual_rms: [f64; 3],
    pub origin_residual: f64,
    pub basis_determinant: f64,
    pub warnings: Vec<QualityWarning>,
}

impl QualityReport {
    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "operator frame quality")?;
        for (pair, angle) in self.axis_pair_angles.iter() {
            writeln!(f, "  angle {pair}: {angle:.2}°")?;
        }
        for (axis, rms) in Axis::ALL.iter().zip(self.residual_rms) {
            writeln!(f, "  residual {axis}: {:.2} mm RMS", rms * 1e3)?;
        }
        writeln!(f, "  origin residual: {:.2} mm", self.origin_residual * 1e3)?;
        writeln!(f, "  oblique determinant: {:.4}", self.basis_determinant)?;
        if self.warnings.is_empty() {
            writeln!(f, "  no warnings")?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}

pub fn frame_quality_report(frames: &OperatorFrames) -> QualityReport {
    frame_quality_report_with(frames, &QualityThresholds::default())
}

pub fn frame_quality_report_with(frames: &OperatorFrames, thresholds: &QualityThresholds) -> QualityReport {
    let d = &frames.diagnostics;
    let determinant = frames.oblique.determinant();
    let mut warnings = Vec::new();
    for (pair, angle) in d.axis_pair_angles.iter() {
        if (angle - 90.0).abs() > thresholds.max_angle_deviation_deg {
            warnings.push(QualityWarning::SkewedPair {
                pair: pair.to_string(),
                angle_deg: angle,
            });
        }
    }
    if determinant.abs() < thresholds.min_determinant {
        warnings.push(QualityWarning::NearCoplanar { determinant });
    }
    for (axis, rms) in Axis::ALL.iter().zip(d.residual_rms) {
        if rms > thresholds.max_residual_rms {
            warnings.push(QualityWarning::NoisySweep {
                axis: *axis,
                residual_rms: rms,
            });
        }
    }
    if d.origin_residual > thresholds.max_origin_residual {
        warnings.push(QualityWarning::LinesFarApart {
            origin_residual: d.origin_residual,
        });
    }
    QualityReport {
        axis_pair_angles: d.axis_pair_angles,
        residual_rms: d.residual_rms,
        origin_residual: d.origin_residual,
        basis_determinant: determinant,
        warnings,
    }
}

/// Noiseless sweep along `direction` through `center`, traversed in the
/// direction's sense. Handy for tests and scripted sessions.
pub fn synthetic_sweep(axis: Axis, center: Vec3, direction: Vec3, half_length: f64, samples: usize, t0: f64) -> CalibrationSweep {
    let d = direction.normalize();
    let samples = (0..samples)
        .map(|i| {
            let s = -half_length + 2.0 * half_length * i as f64 / (samples - 1) as f64;
            SweepSample {
                t: t0 + i as f64 * 0.1,
                position: center + d * s,
            }
        })
        .collect();
    CalibrationSweep::new(axis, samples)
}
