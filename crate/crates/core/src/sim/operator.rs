//! Scripted operators that stand in for a human at the console.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ArmState, Operator, Scenario};
use crate::calibration::OperatorFrames;
use crate::geometry::{RotationMatrix, Vec3};
use crate::hand::{project, synthetic_keypoints, CameraIntrinsics, HandFrame, HandObservation};
use crate::retarget::{MappingMode, RetargetConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsertionScript {
    /// Lower the left hand for the corrective moves.
    pub use_precise_scale: bool,
    /// Standard deviation of the per-axis noise added to every wrist position, meters.
    pub wrist_noise: f64,
    pub frame_rate: f64,
    /// Nominal hand speed during moves, m/s.
    pub hand_speed: f64,
    /// Time the operator waits after each move before looking at the arm.
    pub dwell: f64,
    pub corrections: usize,
    pub seed: u64,
}

impl Default for InsertionScript {
    fn default() -> Self {
        Self {
            use_precise_scale: true,
            wrist_noise: 0.005,
            frame_rate: 10.0,
            hand_speed: 0.3,
            dwell: 3.0,
            corrections: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Hold { until: f64 },
    Move { from: Vec3, to: Vec3, start: f64, end: f64 },
}

/// A careful operator inserting a peg: one coarse move toward the hole, then
/// a few corrective moves, each planned from the arm pose seen after the
/// previous move has settled. Every published wrist position carries
/// independent Gaussian noise.
///
/// The operator knows the mapping it is driving (frames, scale values,
/// `{wcf}` pose), so each move would be exact without the noise.
#[derive(Debug, Clone)]
pub struct ScriptedInserter {
    script: InsertionScript,
    frames: OperatorFrames,
    retarget: RetargetConfig,
    target: Vec3,
    intrinsics: CameraIntrinsics,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    hand: Vec3,
    wrist_rotation: RotationMatrix,
    phase: Phase,
    moves_done: usize,
    next_frame: f64,
    finished: bool,
}

impl ScriptedInserter {
    pub fn new(script: InsertionScript, frames: OperatorFrames, retarget: RetargetConfig, scenario: &Scenario) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(script.seed),
            noise: Normal::new(0.0, script.wrist_noise.max(0.0)).expect("finite noise"),
            hand: frames.cartesian.translation,
            wrist_rotation: RotationMatrix::from_euler_angles(0.0, 0.0, 0.1),
            phase: Phase::Hold { until: 0.5 },
            moves_done: 0,
            next_frame: 0.0,
            finished: false,
            target: scenario.target_pose_w.translation,
            intrinsics: CameraIntrinsics::default(),
            script,
            frames,
            retarget,
        }
    }

    fn precise(&self) -> bool {
        self.script.use_precise_scale && self.moves_done >= 1
    }

    fn alpha(&self) -> f64 {
        if self.precise() {
            self.retarget.alpha_slow
        } else {
            self.retarget.alpha_fast
        }
    }

    /// Wrist displacement in the camera frame that moves the end effector by
    /// `delta_w` at scale `alpha`.
    fn hand_displacement(&self, delta_w: &Vec3, alpha: f64) -> Vec3 {
        let m = self.retarget.wcf_pose.rotation.inverse() * delta_w / alpha;
        let cf = match self.retarget.mode {
            MappingMode::Cartesian => m,
            MappingMode::Oblique => self.frames.oblique.compose(&m),
        };
        self.frames.cartesian.rotation * cf
    }

    fn plan_move(&mut self, now: f64, arm: &ArmState) {
        let error = self.target - arm.ee_pose_w.translation;
        let to = self.hand + self.hand_displacement(&error, self.alpha());
        let duration = ((to - self.hand).norm() / self.script.hand_speed).max(0.3);
        self.phase = Phase::Move {
            from: self.hand,
            to,
            start: now,
            end: now + duration,
        };
    }

    fn advance(&mut self, now: f64, arm: &ArmState) {
        loop {
            match self.phase {
                Phase::Hold { until } if now >= until => {
                    if self.moves_done > self.script.corrections {
                        self.finished = true;
                        return;
                    }
                    self.plan_move(now, arm);
                }
                Phase::Move { to, end, .. } if now >= end => {
                    self.hand = to;
                    self.moves_done += 1;
                    self.phase = Phase::Hold { until: end + self.script.dwell };
                }
                Phase::Move { from, to, start, end } => {
                    let s = (now - start) / (end - start);
                    self.hand = from + (to - from) * s;
                    return;
                }
                Phase::Hold { .. } => return,
            }
        }
    }

    fn observation(&self, p: Vec3, thumb_index: f64, thumb_pinky: f64) -> HandObservation {
        let px = project(&p, &self.intrinsics).unwrap_or([self.intrinsics.cx, self.intrinsics.cy]);
        HandObservation {
            keypoints: synthetic_keypoints(px, thumb_index, thumb_pinky),
            wrist_position_c: p,
            wrist_rotation_c: self.wrist_rotation,
            confidence: 1.0,
        }
    }
}

impl Operator for ScriptedInserter {
    fn poll(&mut self, now: f64, arm: &ArmState) -> Option<HandFrame> {
        if self.finished || now + 1e-9 < self.next_frame {
            return None;
        }
        self.next_frame += 1.0 / self.script.frame_rate;
        self.advance(now, arm);
        if self.finished {
            return None;
        }
        let noise = Vec3::new(
            self.noise.sample(&mut self.rng),
            self.noise.sample(&mut self.rng),
            self.noise.sample(&mut self.rng),
        );
        let right = self.observation(self.hand + noise, 90.0, 110.0);
        let left_y = if self.precise() {
            self.retarget.left_wrist_y_threshold - 0.1
        } else {
            self.retarget.left_wrist_y_threshold + 0.1
        };
        let left = self.observation(Vec3::new(-0.25, left_y, 0.6), 90.0, 110.0);
        Some(HandFrame::new(now).with_right(right).with_left(left))
    }

    fn finished(&self) -> bool {
        self.finished
    }
}
