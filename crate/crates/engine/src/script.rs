//! Scripted sessions: a calibration followed by free-form teleoperation,
//! for demos and replay tests without a console.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use retarget_core::calibration::Axis;
use retarget_core::hand::{project, synthetic_keypoints, CameraIntrinsics, HandFrame, HandObservation};
use retarget_core::{RotationMatrix, Vec3};

use crate::protocol::{CalibControl, ClientMessage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptConfig {
    /// Seconds of teleoperation after calibration.
    pub duration: f64,
    pub frame_rate: f64,
    /// Per-axis wrist noise, meters.
    pub wrist_noise: f64,
    pub seed: u64,
}

impl Default for ScriptConfig {
    fn default() -> Self {
        Self {
            duration: 300.0,
            frame_rate: 30.0,
            wrist_noise: 0.002,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LeftHand {
    Absent,
    Raised,
    Lowered,
    Pinched,
}

struct Builder {
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    intrinsics: CameraIntrinsics,
    frame_index: u64,
    frame_rate: f64,
    out: Vec<ClientMessage>,
}

impl Builder {
    fn t(&self) -> f64 {
        self.frame_index as f64 / self.frame_rate
    }

    fn observation(&mut self, p: Vec3, r: RotationMatrix, thumb_index: f64, thumb_pinky: f64) -> HandObservation {
        let px = project(&p, &self.intrinsics).unwrap_or([self.intrinsics.cx, self.intrinsics.cy]);
        HandObservation {
            keypoints: synthetic_keypoints(px, thumb_index, thumb_pinky),
            wrist_position_c: p,
            wrist_rotation_c: r,
            confidence: 1.0,
        }
    }

    fn noisy(&mut self, p: Vec3) -> Vec3 {
        p + Vec3::new(
            self.noise.sample(&mut self.rng),
            self.noise.sample(&mut self.rng),
            self.noise.sample(&mut self.rng),
        )
    }

    fn push_frame(&mut self, frame: HandFrame) {
        self.out.push(ClientMessage::HandFrame(frame));
        self.frame_index += 1;
    }

    fn control(&mut self, c: CalibControl) {
        self.out.push(ClientMessage::CalibControl(c));
    }
}

/// A deterministic session for `cfg.seed`: three slightly skewed calibration
/// sweeps, then wandering wrist motion with scale changes, freezes, gripper
/// pinches and brief tracking dropouts.
pub fn scripted_session(cfg: &ScriptConfig) -> Vec<ClientMessage> {
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        noise: Normal::new(0.0, cfg.wrist_noise).expect("finite noise"),
        intrinsics: CameraIntrinsics::default(),
        frame_index: 0,
        frame_rate: cfg.frame_rate,
        out: Vec::new(),
    };
    let center = Vec3::new(0.02, 0.0, 0.65);
    let rest = RotationMatrix::from_euler_angles(0.0, 0.0, 0.1);

    let directions = [
        Vec3::new(1.0, 0.05, -0.08),
        Vec3::new(0.15, 1.0, 0.05),
        Vec3::new(-0.05, 0.2, 1.0),
    ];
    for (axis, d) in Axis::ALL.into_iter().zip(directions) {
        let d = d.normalize();
        b.control(CalibControl::BeginAxis { axis });
        let n = (2.0 * b.frame_rate) as usize;
        for i in 0..n {
            let s = -0.15 + 0.3 * i as f64 / (n - 1) as f64;
            let p = b.noisy(center + d * s);
            let obs = b.observation(p, rest, 90.0, 110.0);
            let t = b.t();
            b.push_frame(HandFrame::new(t).with_right(obs));
        }
        b.control(CalibControl::EndAxis);
        // a pause between sweeps
        b.frame_index += b.frame_rate as u64;
    }
    b.control(CalibControl::Finish);

    // sum of slow sinusoids per axis
    let waves: Vec<[(f64, f64, f64); 3]> = (0..3)
        .map(|_| {
            let mut w = [(0.0, 0.0, 0.0); 3];
            for term in &mut w {
                *term = (
                    b.rng.random_range(0.02..0.07),
                    b.rng.random_range(0.03..0.25) * std::f64::consts::TAU,
                    b.rng.random_range(0.0..std::f64::consts::TAU),
                );
            }
            w
        })
        .collect();
    let start = b.t();
    let frames = (cfg.duration * b.frame_rate).round() as u64;
    let mut left = LeftHand::Raised;
    let mut closed = false;
    let mut segment_end = start;
    for _ in 0..frames {
        let t = b.t();
        if t >= segment_end {
            segment_end = t + b.rng.random_range(2.0..10.0);
            left = match b.rng.random_range(0..20) {
                0..=8 => LeftHand::Raised,
                9..=14 => LeftHand::Lowered,
                15..=17 => LeftHand::Pinched,
                _ => LeftHand::Absent,
            };
            closed = b.rng.random_bool(0.3);
        }
        let tau = t - start;
        let mut p = center;
        for (k, w) in waves.iter().enumerate() {
            p[k] += w.iter().map(|(a, f, ph)| a * (f * tau + ph).sin()).sum::<f64>();
        }
        let p = b.noisy(p);
        let r = RotationMatrix::from_euler_angles(0.3 * (0.2 * tau).sin(), 0.2 * (0.13 * tau).cos(), 0.1 + 0.4 * (0.07 * tau).sin());
        let mut frame = HandFrame::new(t);
        if b.rng.random_range(0..50) != 0 {
            let obs = b.observation(p, r, if closed { 12.0 } else { 90.0 }, 110.0);
            frame = frame.with_right(obs);
        }
        let left_obs = match left {
            LeftHand::Absent => None,
            LeftHand::Raised => Some(b.observation(Vec3::new(-0.25, 0.1, 0.6), rest, 90.0, 110.0)),
            LeftHand::Lowered => Some(b.observation(Vec3::new(-0.25, -0.1, 0.6), rest, 90.0, 110.0)),
            LeftHand::Pinched => Some(b.observation(Vec3::new(-0.25, 0.1, 0.6), rest, 90.0, 5.0)),
        };
        if let Some(l) = left_obs {
            frame = frame.with_left(l);
        }
        b.push_frame(frame);
    }
    b.out
}

pub fn write_session(messages: &[ClientMessage], path: &std::path::Path) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for m in messages {
        writeln!(out, "{}", m.to_line())?;
    }
    out.flush()
}
