use serde::{Deserialize, Serialize};

use super::{check_scenario, ArmState, Scenario, ScenarioKind, ServoConfig, SimArm, SimError};
use crate::calibration::OperatorFrames;
use crate::geometry::{geodesic_distance, RigidTransform};
use crate::hand::HandFrame;
use crate::retarget::{GripperState, RetargetCommand, RetargetConfig, RetargetError, Retargeter};

/// Upper bound on the simulated time spent settling after input ends.
pub const MAX_SETTLE_TIME: f64 = 120.0;

/// One servo tick of the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub commanded: RigidTransform,
    pub achieved: RigidTransform,
    pub alpha: f64,
    pub gripper: GripperState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub scenario: ScenarioKind,
    pub success: bool,
    pub position_error: f64,
    pub axis_error: f64,
    /// Simulated seconds from the first frame to the end of settling.
    pub duration: f64,
    pub ticks: u64,
    pub frames: u64,
    pub rejected_frames: u64,
    pub settled: bool,
    /// Straight-line distance between the initial and final end-effector positions.
    pub ee_displacement: f64,
    pub final_pose_w: RigidTransform,
    pub final_gripper: GripperState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub report: EpisodeReport,
    pub trajectory: Vec<TrajectorySample>,
}

/// Couples a retargeter to a simulated arm on a fixed tick grid.
///
/// Time starts at the first ingested frame. Frames advance the clock to
/// their timestamp (ticking the arm on the way) and then update the active
/// command; between frames the last command is reissued every tick.
#[derive(Debug, Clone)]
pub struct EpisodeRunner {
    retargeter: Retargeter,
    arm: SimArm,
    scenario: Scenario,
    t0: Option<f64>,
    ticks: u64,
    frames: u64,
    rejected: u64,
    command: Option<RetargetCommand>,
    trajectory: Vec<TrajectorySample>,
}

impl EpisodeRunner {
    pub fn new(retargeter: Retargeter, servo: ServoConfig, scenario: Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let arm = SimArm::new(servo, ArmState::at(scenario.start_pose_w))?;
        Ok(Self {
            retargeter,
            arm,
            scenario,
            t0: None,
            ticks: 0,
            frames: 0,
            rejected: 0,
            command: None,
            trajectory: Vec::new(),
        })
    }

    pub fn retargeter(&self) -> &Retargeter {
        &self.retargeter
    }

    pub fn retargeter_mut(&mut self) -> &mut Retargeter {
        &mut self.retargeter
    }

    pub fn arm(&self) -> &ArmState {
        self.arm.state()
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn command(&self) -> Option<&RetargetCommand> {
        self.command.as_ref()
    }

    pub fn trajectory(&self) -> &[TrajectorySample] {
        &self.trajectory
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Current simulated time.
    pub fn now(&self) -> f64 {
        self.t0.unwrap_or(0.0) + self.ticks as f64 * self.arm.config().tick
    }

    /// Starts the clock at `t` if it has not started yet.
    pub fn start_clock(&mut self, t: f64) {
        self.t0.get_or_insert(t);
    }

    /// Advances one tick, reissuing the active command (or holding position
    /// when there is none yet).
    pub fn tick(&mut self) -> TrajectorySample {
        let arm = *self.arm.state();
        let command = self
            .command
            .unwrap_or_else(|| RetargetCommand::hold(arm.ee_pose_w, arm.gripper));
        let state = *self.arm.step(command);
        self.ticks += 1;
        let sample = TrajectorySample {
            t: self.now(),
            commanded: command.desired_ee_pose_w,
            achieved: state.ee_pose_w,
            alpha: command.alpha_active,
            gripper: state.gripper,
        };
        self.trajectory.push(sample);
        sample
    }

    /// Ticks until the next tick would pass `t`.
    pub fn advance_to(&mut self, t: f64) {
        self.start_clock(t);
        let tick = self.arm.config().tick;
        let t0 = self.t0.unwrap_or(t);
        while t0 + (self.ticks + 1) as f64 * tick <= t + 1e-9 * tick {
            self.tick();
        }
    }

    /// Advances to the frame's timestamp and retargets it. A frame that
    /// fails to retarget is counted as rejected and leaves the command as is.
    pub fn ingest(&mut self, frame: &HandFrame) -> Result<RetargetCommand, RetargetError> {
        self.advance_to(frame.t);
        self.apply(frame)
    }

    /// Retargets a frame at the current time, leaving the clock alone.
    pub fn apply(&mut self, frame: &HandFrame) -> Result<RetargetCommand, RetargetError> {
        match self.retargeter.step(frame, &self.arm.state().ee_pose_w) {
            Ok(command) => {
                self.frames += 1;
                self.command = Some(command);
                Ok(command)
            }
            Err(e) => {
                self.rejected += 1;
                Err(e)
            }
        }
    }

    /// Counts a frame the caller discarded before retargeting.
    pub fn reject(&mut self) {
        self.rejected += 1;
    }

    /// Ticks until the arm has reached the last command and the delay line
    /// has drained, or `MAX_SETTLE_TIME` passes.
    pub fn settle(&mut self) -> bool {
        let tick = self.arm.config().tick;
        let limit = (MAX_SETTLE_TIME / tick).ceil() as u64;
        for _ in 0..limit {
            if self.is_settled() {
                return true;
            }
            self.tick();
        }
        self.is_settled()
    }

    fn is_settled(&self) -> bool {
        match &self.command {
            None => true,
            Some(c) => self.arm.settled_at(c),
        }
    }

    pub fn report(&self) -> EpisodeReport {
        let state = self.arm.state();
        let outcome = check_scenario(state, &self.scenario);
        EpisodeReport {
            scenario: self.scenario.kind,
            success: outcome.success,
            position_error: outcome.position_error,
            axis_error: outcome.axis_error,
            duration: self.ticks as f64 * self.arm.config().tick,
            ticks: self.ticks,
            frames: self.frames,
            rejected_frames: self.rejected,
            settled: self.is_settled(),
            ee_displacement: (state.ee_pose_w.translation - self.scenario.start_pose_w.translation).norm(),
            final_pose_w: state.ee_pose_w,
            final_gripper: state.gripper,
        }
    }

    /// Settles and returns the report together with the full trajectory.
    pub fn finish(mut self) -> Episode {
        self.settle();
        Episode {
            report: self.report(),
            trajectory: self.trajectory,
        }
    }
}

/// Replays a hand stream through the retargeter and simulated arm.
pub fn run_episode<'a>(
    stream: impl IntoIterator<Item = &'a HandFrame>,
    frames: &OperatorFrames,
    retarget: &RetargetConfig,
    servo: &ServoConfig,
    scenario: &Scenario,
) -> Result<Episode, SimError> {
    let retargeter = Retargeter::with_frames(*retarget, *frames)?;
    let mut runner = EpisodeRunner::new(retargeter, *servo, *scenario)?;
    for frame in stream {
        runner.ingest(frame)?;
    }
    Ok(runner.finish())
}

/// A source of hand frames that reacts to the arm, like a human watching the
/// robot.
pub trait Operator {
    /// Called once per tick; returns a frame when the operator publishes one.
    fn poll(&mut self, now: f64, arm: &ArmState) -> Option<HandFrame>;
    fn finished(&self) -> bool;
}

/// Runs `operator` in closed loop with the arm. Returns the episode and the
/// frames the operator produced, which replay to the same episode through
/// `run_episode`.
pub fn run_closed_loop(
    operator: &mut impl Operator,
    frames: &OperatorFrames,
    retarget: &RetargetConfig,
    servo: &ServoConfig,
    scenario: &Scenario,
    time_limit: f64,
) -> Result<(Episode, Vec<HandFrame>), SimError> {
    let retargeter = Retargeter::with_frames(*retarget, *frames)?;
    let mut runner = EpisodeRunner::new(retargeter, *servo, *scenario)?;
    runner.start_clock(0.0);
    let mut emitted = Vec::new();
    while !operator.finished() && runner.now() < time_limit {
        if let Some(frame) = operator.poll(runner.now(), runner.arm()) {
            runner.ingest(&frame)?;
            emitted.push(frame);
        }
        if operator.finished() {
            break;
        }
        runner.tick();
    }
    Ok((runner.finish(), emitted))
}

/// Aggregate view of a trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub samples: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub commanded_path_length: f64,
    pub achieved_path_length: f64,
    pub max_tracking_error: f64,
    pub max_rotation_tracking_error: f64,
    pub final_tracking_error: f64,
    /// Seconds spent at each scale, `[fast, slow, frozen]`, by the `alpha`
    /// recorded on each tick.
    pub time_by_alpha: [f64; 3],
    pub gripper_toggles: usize,
}

pub fn summarize_trajectory(samples: &[TrajectorySample], retarget: &RetargetConfig) -> Option<TrajectorySummary> {
    let first = samples.first()?;
    let last = samples.last()?;
    let mut summary = TrajectorySummary {
        samples: samples.len(),
        start_time: first.t,
        end_time: last.t,
        commanded_path_length: 0.0,
        achieved_path_length: 0.0,
        max_tracking_error: 0.0,
        max_rotation_tracking_error: 0.0,
        final_tracking_error: (last.commanded.translation - last.achieved.translation).norm(),
        time_by_alpha: [0.0; 3],
        gripper_toggles: 0,
    };
    for s in samples {
        let e = (s.commanded.translation - s.achieved.translation).norm();
        summary.max_tracking_error = summary.max_tracking_error.max(e);
        let r = geodesic_distance(&s.commanded.rotation, &s.achieved.rotation);
        summary.max_rotation_tracking_error = summary.max_rotation_tracking_error.max(r);
    }
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        summary.commanded_path_length += (b.commanded.translation - a.commanded.translation).norm();
        summary.achieved_path_length += (b.achieved.translation - a.achieved.translation).norm();
        let dt = b.t - a.t;
        let slot = if b.alpha == 0.0 {
            2
        } else if b.alpha == retarget.alpha_slow {
            1
        } else {
            0
        };
        summary.time_by_alpha[slot] += dt;
        if a.gripper != b.gripper {
            summary.gripper_toggles += 1;
        }
    }
    Some(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RotationMatrix, Vec3};
    use crate::hand::{landmark, synthetic_keypoints, HandObservation};

    fn obs(p: Vec3) -> HandObservation {
        HandObservation {
            keypoints: synthetic_keypoints([320.0, 300.0], 80.0, 100.0),
            wrist_position_c: p,
            wrist_rotation_c: RotationMatrix::identity(),
            confidence: 1.0,
        }
    }

    fn frozen_left() -> HandObservation {
        let mut o = obs(Vec3::new(-0.2, 0.1, 0.6));
        o.keypoints.0[landmark::PINKY_TIP] = o.keypoints.0[landmark::THUMB_TIP];
        o
    }

    fn frames() -> OperatorFrames {
        OperatorFrames::aligned_with_camera(Vec3::new(0.0, 0.0, 0.6))
    }

    #[test]
    fn empty_stream_reports_initial_state() {
        let sc = Scenario::peg_in_hole();
        let ep = run_episode(&[], &frames(), &Default::default(), &Default::default(), &sc).unwrap();
        assert_eq!(ep.report.ticks, 0);
        assert_eq!(ep.report.duration, 0.0);
        assert_eq!(ep.report.success, check_scenario(&ArmState::at(sc.start_pose_w), &sc).success);
        assert!(ep.trajectory.is_empty());
    }

    #[test]
    fn frozen_stream_never_moves() {
        let stream: Vec<_> = (0..50)
            .map(|i| {
                let p = Vec3::new(0.01 * i as f64, -0.005 * i as f64, 0.6);
                HandFrame::new(i as f64 * 0.1).with_right(obs(p)).with_left(frozen_left())
            })
            .collect();
        let ep = run_episode(&stream, &frames(), &Default::default(), &Default::default(), &Scenario::peg_in_hole()).unwrap();
        assert_eq!(ep.report.ee_displacement, 0.0);
        assert!(ep.trajectory.iter().all(|s| s.achieved == Scenario::peg_in_hole().start_pose_w));
    }

    #[test]
    fn ticks_land_on_frame_timestamps() {
        let stream = [
            HandFrame::new(1.0).with_right(obs(Vec3::new(0.0, 0.0, 0.6))),
            HandFrame::new(1.5).with_right(obs(Vec3::new(0.1, 0.0, 0.6))),
        ];
        let ep = run_episode(&stream, &frames(), &Default::default(), &Default::default(), &Scenario::peg_in_hole()).unwrap();
        assert!(ep.report.settled);
        assert_eq!(ep.report.frames, 2);
        // 50 ticks between the frames, then the settle phase
        assert!((ep.trajectory[49].t - 1.5).abs() < 1e-12);
        assert_eq!(ep.trajectory[49].commanded, Scenario::peg_in_hole().start_pose_w);
        assert_ne!(ep.trajectory[50].commanded, Scenario::peg_in_hole().start_pose_w);
        let moved = ep.report.final_pose_w.translation - Scenario::peg_in_hole().start_pose_w.translation;
        assert!((moved - Vec3::new(0.03, 0.0, 0.0)).norm() < 1e-12);
        assert!(ep.trajectory.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn uncalibrated_runner_rejects_frames() {
        let rt = Retargeter::new(Default::default()).unwrap();
        let mut runner = EpisodeRunner::new(rt, Default::default(), Scenario::peg_in_hole()).unwrap();
        assert!(runner.ingest(&HandFrame::new(0.0).with_right(obs(Vec3::zeros()))).is_err());
        assert_eq!(runner.report().rejected_frames, 1);
    }

    #[test]
    fn summary_tracks_paths_and_modes() {
        let stream: Vec<_> = (0..30)
            .map(|i| HandFrame::new(i as f64 * 0.1).with_right(obs(Vec3::new(0.002 * i as f64, 0.0, 0.6))))
            .collect();
        let cfg = RetargetConfig::default();
        let ep = run_episode(&stream, &frames(), &cfg, &Default::default(), &Scenario::peg_in_hole()).unwrap();
        let s = summarize_trajectory(&ep.trajectory, &cfg).unwrap();
        assert_eq!(s.samples, ep.trajectory.len());
        assert!((s.commanded_path_length - 0.3 * 0.058).abs() < 1e-9);
        assert!((s.achieved_path_length - s.commanded_path_length).abs() < 1e-9);
        assert_eq!(s.final_tracking_error, 0.0);
        assert!(s.time_by_alpha[1] == 0.0 && s.time_by_alpha[2] == 0.0);
        assert!(summarize_trajectory(&[], &cfg).is_none());
    }
}
