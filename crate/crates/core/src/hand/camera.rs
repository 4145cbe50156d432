use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{HandKeypoints2D, NUM_KEYPOINTS};
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("weak-perspective scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for CameraIntrinsics {
    /// A 640×480 RGB-D sensor with a ~69° horizontal field of view.
    fn default() -> Self {
        Self {
            fx: 465.0,
            fy: 465.0,
            cx: 320.0,
            cy: 240.0,
            width: 640.0,
            height: 480.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: f64, height: f64) -> Result<Self, CameraError> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(CameraError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(CameraError::InvalidIntrinsics("image size must be positive"));
        }
        if !(0.0..=self.width).contains(&self.cx) || !(0.0..=self.height).contains(&self.cy) {
            return Err(CameraError::InvalidIntrinsics("principal point outside image"));
        }
        Ok(())
    }
}

/// Pixel plus metric depth to a camera-frame point.
pub fn deproject(u: f64, v: f64, depth: f64, intr: &CameraIntrinsics) -> Result<Vec3, CameraError> {
    if !(depth > 0.0) {
        return Err(CameraError::NonPositiveDepth(depth));
    }
    Ok(Vec3::new(
        (u - intr.cx) * depth / intr.fx,
        (v - intr.cy) * depth / intr.fy,
        depth,
    ))
}

/// Camera-frame point to pixel; `None` behind the camera.
pub fn project(p: &Vec3, intr: &CameraIntrinsics) -> Option<[f64; 2]> {
    (p.z > 0.0).then(|| [intr.fx * p.x / p.z + intr.cx, intr.fy * p.y / p.z + intr.cy])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelRect {
    pub min_u: f64,
    pub min_v: f64,
    pub max_u: f64,
    pub max_v: f64,
}

impl PixelRect {
    pub fn width(&self) -> f64 {
        self.max_u - self.min_u
    }

    pub fn height(&self) -> f64 {
        self.max_v - self.min_v
    }
}

/// Axis-aligned box around the landmarks, each side pushed out by `margin`
/// times the box extent on that axis, then clamped to the image.
pub fn keypoint_bbox(keypoints: &HandKeypoints2D, margin: f64, intr: &CameraIntrinsics) -> PixelRect {
    let (mut min_u, mut min_v) = (f64::INFINITY, f64::INFINITY);
    let (mut max_u, mut max_v) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for [u, v] in keypoints.0.iter().take(NUM_KEYPOINTS) {
        min_u = min_u.min(*u);
        max_u = max_u.max(*u);
        min_v = min_v.min(*v);
        max_v = max_v.max(*v);
    }
    let (du, dv) = (margin * (max_u - min_u), margin * (max_v - min_v));
    PixelRect {
        min_u: (min_u - du).clamp(0.0, intr.width),
        min_v: (min_v - dv).clamp(0.0, intr.height),
        max_u: (max_u + du).clamp(0.0, intr.width),
        max_v: (max_v + dv).clamp(0.0, intr.height),
    }
}

/// Monocular depth from a weak-perspective scale: `C · f / s_h`.
pub fn weak_perspective_depth(s_h: f64, intr: &CameraIntrinsics, c: f64) -> Result<f64, CameraError> {
    if !(s_h > 0.0) {
        return Err(CameraError::NonPositiveScale(s_h));
    }
    Ok(c * intr.fx / s_h)
}

/// Solves `C` from a single reference observation at known depth.
pub fn calibrate_weak_perspective_constant(
    reference_depth: f64,
    reference_scale: f64,
    intr: &CameraIntrinsics,
) -> Result<f64, CameraError> {
    if !(reference_depth > 0.0) {
        return Err(CameraError::NonPositiveDepth(reference_depth));
    }
    if !(reference_scale > 0.0) {
        return Err(CameraError::NonPositiveScale(reference_scale));
    }
    Ok(reference_depth * reference_scale / intr.fx)
}

/// Row-major metric depth image; zero or non-finite pixels are holes.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DepthMap {
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let d = *self.data.get(v * self.width + u)? as f64;
        (d.is_finite() && d > 0.0).then_some(d)
    }
}

/// Median of the valid depths in the 5×5 window centred on `(u, v)`.
pub fn wrist_depth_from_map(map: &DepthMap, u: f64, v: f64) -> Option<f64> {
    let (cu, cv) = (u.round() as i64, v.round() as i64);
    let mut window: Vec<f64> = Vec::with_capacity(25);
    for dv in -2..=2 {
        for du in -2..=2 {
            let (x, y) = (cu + du, cv + dv);
            if x < 0 || y < 0 || x as usize >= map.width || y as usize >= map.height {
                continue;
            }
            if let Some(d) = map.get(x as usize, y as usize) {
                window.push(d);
            }
        }
    }
    if window.is_empty() {
        return None;
    }
    window.sort_by(f64::total_cmp);
    let n = window.len();
    Some(if n % 2 == 1 {
        window[n / 2]
    } else {
        0.5 * (window[n / 2 - 1] + window[n / 2])
    })
}
