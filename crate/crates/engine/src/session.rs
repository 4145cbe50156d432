//! The engine loop's state: calibration collection, retargeting and the
//! simulated arm, driven one message or one tick at a time.

use serde::{Deserialize, Serialize};

use retarget_core::calibration::{
    calibrate, frame_quality_report, Axis, CalibrationConfig, CalibrationDiagnostics, CalibrationError,
    CalibrationSweep, OperatorFrames, SweepSample,
};
use retarget_core::hand::HandFrame;
use retarget_core::retarget::Retargeter;
use retarget_core::sim::{EpisodeReport, EpisodeRunner, Scenario, ScenarioKind, TrajectorySample};

use crate::protocol::{
    ArmWire, CalibControl, CalibrationMessage, CalibrationPhase, ClientMessage, EngineStateMessage, ErrorCode,
    ErrorMessage, ServerMessage, SessionMessage,
};
use crate::{EngineError, SessionConfig};

/// Who owns the clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    /// Frame timestamps drive the simulation (replay).
    FrameTimes,
    /// The caller ticks the simulation from a wall clock (live).
    External,
}

/// Partitions inbound frames into per-axis sweeps.
#[derive(Debug, Clone, Default)]
pub struct SweepCollector {
    active: Option<(Axis, Vec<SweepSample>)>,
    sweeps: [Option<CalibrationSweep>; 3],
}

impl SweepCollector {
    pub fn collecting(&self) -> Option<Axis> {
        self.active.as_ref().map(|(a, _)| *a)
    }

    /// Starts a sweep; any unfinished sweep is discarded.
    pub fn begin(&mut self, axis: Axis) {
        self.active = Some((axis, Vec::new()));
    }

    /// Closes the active sweep, replacing any earlier sweep of that axis.
    pub fn end(&mut self) -> Result<Axis, ErrorMessage> {
        let (axis, samples) = self
            .active
            .take()
            .ok_or_else(|| ErrorMessage::new(ErrorCode::Protocol, "end_axis without begin_axis"))?;
        self.sweeps[axis.index()] = Some(CalibrationSweep::new(axis, samples));
        Ok(axis)
    }

    /// Adds the right wrist of `frame` to the active sweep.
    pub fn push(&mut self, frame: &HandFrame) -> Result<(), ErrorMessage> {
        let Some((_, samples)) = self.active.as_mut() else {
            return Err(ErrorMessage::new(ErrorCode::Protocol, "no sweep is being recorded"));
        };
        let right = frame
            .right
            .as_ref()
            .ok_or_else(|| ErrorMessage::new(ErrorCode::InvalidFrame, "sweep frame without a right hand"))?;
        samples.push(SweepSample {
            t: frame.t,
            position: right.wrist_position_c,
        });
        Ok(())
    }

    pub fn sweeps(&self) -> Vec<CalibrationSweep> {
        self.sweeps.iter().flatten().cloned().collect()
    }

    /// Runs calibration on the recorded sweeps.
    ///
    /// On failure the collector keeps what can be reused: a missing axis
    /// keeps the others, a degenerate sweep drops only that sweep, and any
    /// other failure drops everything.
    pub fn finish(&mut self, cfg: &CalibrationConfig) -> Result<OperatorFrames, CalibrationError> {
        self.active = None;
        let sweeps = self.sweeps();
        match calibrate(&sweeps, cfg) {
            Ok(frames) => {
                self.sweeps = Default::default();
                Ok(frames)
            }
            Err(e) => {
                match &e {
                    CalibrationError::MissingAxis(_) => {}
                    CalibrationError::SweepDegenerate { axis, .. } => self.sweeps[axis.index()] = None,
                    _ => self.sweeps = Default::default(),
                }
                Err(e)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub episode: EpisodeReport,
    pub calibrated: bool,
    pub calibration: Option<CalibrationDiagnostics>,
    pub calibration_attempts: u64,
    pub calibration_failures: u64,
    pub messages: u64,
    pub rejected_messages: u64,
}

pub struct Session {
    runner: EpisodeRunner,
    collector: SweepCollector,
    calibration: CalibrationConfig,
    clock: Clock,
    last_frame_t: Option<f64>,
    seed: u64,
    calibration_attempts: u64,
    calibration_failures: u64,
    messages: u64,
    rejected: u64,
    hello: SessionMessage,
}

impl Session {
    pub fn new(cfg: &SessionConfig, frames: Option<OperatorFrames>, clock: Clock) -> Result<Self, EngineError> {
        let mut retargeter = Retargeter::new(cfg.retarget)?;
        if let Some(f) = frames {
            retargeter.set_frames(f);
        }
        let scenario = Scenario::from_kind(cfg.scenario);
        let mut runner = EpisodeRunner::new(retargeter, cfg.servo, scenario)?;
        if clock == Clock::External {
            runner.start_clock(0.0);
        }
        Ok(Self {
            runner,
            collector: SweepCollector::default(),
            calibration: cfg.calibration_config(),
            clock,
            last_frame_t: None,
            seed: cfg.seed,
            calibration_attempts: 0,
            calibration_failures: 0,
            messages: 0,
            rejected: 0,
            hello: SessionMessage {
                scenario,
                camera: cfg.camera,
                tick: cfg.servo.tick,
            },
        })
    }

    pub fn hello(&self) -> ServerMessage {
        ServerMessage::Session(self.hello)
    }

    pub fn phase(&self) -> CalibrationPhase {
        match (self.collector.collecting(), self.runner.retargeter().frames()) {
            (Some(axis), _) => CalibrationPhase::Collecting { axis },
            (None, Some(_)) => CalibrationPhase::Calibrated,
            (None, None) => CalibrationPhase::Uncalibrated,
        }
    }

    pub fn now(&self) -> f64 {
        self.runner.now()
    }

    fn reject(&mut self, error: ErrorMessage) -> Vec<ServerMessage> {
        self.rejected += 1;
        log::warn!("rejected message {}: {}", self.messages, error.message);
        vec![ServerMessage::Error(error)]
    }

    /// Handles one raw inbound line. Replies (errors, calibration results)
    /// are returned for broadcast.
    pub fn handle_line(&mut self, line: &str) -> Vec<ServerMessage> {
        if line.trim().is_empty() {
            return Vec::new();
        }
        match ClientMessage::parse(line) {
            Ok(msg) => self.handle(msg),
            Err(e) => {
                self.messages += 1;
                self.reject(ErrorMessage::new(ErrorCode::ParseError, e.to_string()))
            }
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        self.messages += 1;
        match msg {
            ClientMessage::HandFrame(frame) => self.handle_frame(&frame),
            ClientMessage::CalibControl(control) => self.handle_control(control),
        }
    }

    fn handle_frame(&mut self, frame: &HandFrame) -> Vec<ServerMessage> {
        if !frame.t.is_finite() {
            return self.reject(ErrorMessage::new(ErrorCode::InvalidFrame, "timestamp is not finite"));
        }
        if let Some(previous) = self.last_frame_t {
            if frame.t < previous {
                return self.reject(ErrorMessage::new(
                    ErrorCode::TimestampRegression,
                    format!("timestamp {} is earlier than previous {previous}", frame.t),
                ));
            }
        }
        self.last_frame_t = Some(frame.t);
        if self.clock == Clock::FrameTimes {
            self.runner.advance_to(frame.t);
        }
        if self.collector.collecting().is_some() {
            return match self.collector.push(frame) {
                Ok(()) => Vec::new(),
                Err(e) => self.reject(e),
            };
        }
        match self.runner.apply(frame) {
            Ok(_) => Vec::new(),
            Err(e) => self.reject((&e).into()),
        }
    }

    fn handle_control(&mut self, control: CalibControl) -> Vec<ServerMessage> {
        match control {
            CalibControl::BeginAxis { axis } => {
                log::info!("collecting sweep {axis}");
                self.collector.begin(axis);
                Vec::new()
            }
            CalibControl::EndAxis => match self.collector.end() {
                Ok(axis) => {
                    log::info!("sweep {axis} closed");
                    Vec::new()
                }
                Err(e) => self.reject(e),
            },
            CalibControl::Finish => {
                self.calibration_attempts += 1;
                match self.collector.finish(&self.calibration) {
                    Ok(frames) => {
                        log::info!("calibrated: {:?}", frames.diagnostics.axis_pair_angles);
                        self.runner.retargeter_mut().set_frames(frames);
                        vec![ServerMessage::Calibration(Box::new(CalibrationMessage {
                            frames,
                            report: frame_quality_report(&frames),
                        }))]
                    }
                    Err(e) => {
                        self.calibration_failures += 1;
                        self.reject((&e).into())
                    }
                }
            }
        }
    }

    /// Advances the simulation one tick and describes the result.
    pub fn tick(&mut self) -> ServerMessage {
        let sample = self.runner.tick();
        ServerMessage::EngineState(self.state_message(&sample))
    }

    fn state_message(&self, sample: &TrajectorySample) -> EngineStateMessage {
        let state = self.runner.retargeter().state();
        let command = self.runner.command();
        EngineStateMessage {
            t: sample.t,
            arm: ArmWire {
                pose: sample.achieved,
                gripper: sample.gripper,
            },
            commanded_pose: command.map(|c| c.desired_ee_pose_w),
            alpha: state.scaling.alpha,
            scaling_mode: state.scaling.mode,
            engaged: command.is_some_and(|c| c.engaged),
            calibration_phase: self.phase(),
        }
    }

    pub fn trajectory(&self) -> &[TrajectorySample] {
        self.runner.trajectory()
    }

    /// Settles the arm and produces the report and trajectory log.
    pub fn finish(self) -> (SessionReport, Vec<TrajectorySample>) {
        let frames = self.runner.retargeter().frames().copied();
        let episode = self.runner.finish();
        let report = SessionReport {
            scenario: episode.report.scenario,
            seed: self.seed,
            episode: episode.report,
            calibrated: frames.is_some(),
            calibration: frames.map(|f| f.diagnostics),
            calibration_attempts: self.calibration_attempts,
            calibration_failures: self.calibration_failures,
            messages: self.messages,
            rejected_messages: self.rejected,
        };
        (report, episode.trajectory)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use retarget_core::calibration::synthetic_sweep;
    use retarget_core::hand::{synthetic_keypoints, HandObservation};
    use retarget_core::{RotationMatrix, Vec3};

    fn hand(p: Vec3) -> HandObservation {
        HandObservation {
            keypoints: synthetic_keypoints([320.0, 240.0], 90.0, 110.0),
            wrist_position_c: p,
            wrist_rotation_c: RotationMatrix::identity(),
            confidence: 1.0,
        }
    }

    fn sweep_messages(axis: Axis, dir: Vec3, half: f64, t0: f64) -> Vec<ClientMessage> {
        let mut out = vec![ClientMessage::CalibControl(CalibControl::BeginAxis { axis })];
        for s in synthetic_sweep(axis, Vec3::new(0.0, 0.0, 0.6), dir, half, 40, t0).samples {
            out.push(ClientMessage::HandFrame(HandFrame::new(s.t).with_right(hand(s.position))));
        }
        out.push(ClientMessage::CalibControl(CalibControl::EndAxis));
        out
    }

    fn replay_session() -> Session {
        let cfg = SessionConfig {
            replay: Some("x".into()),
            ..Default::default()
        };
        Session::new(&cfg, None, Clock::FrameTimes).unwrap()
    }

    fn feed(session: &mut Session, msgs: Vec<ClientMessage>) -> Vec<ServerMessage> {
        msgs.into_iter().flat_map(|m| session.handle(m)).collect()
    }

    #[test]
    fn three_clean_sweeps_calibrate() {
        let mut s = replay_session();
        let mut out = Vec::new();
        for (i, (axis, dir)) in Axis::ALL.iter().zip([Vec3::x(), Vec3::y(), Vec3::z()]).enumerate() {
            out.extend(feed(&mut s, sweep_messages(*axis, dir, 0.15, 10.0 * i as f64)));
        }
        assert!(out.is_empty());
        let reply = s.handle(ClientMessage::CalibControl(CalibControl::Finish));
        match &reply[..] {
            [ServerMessage::Calibration(c)] => assert!(c.report.warnings.is_empty()),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(s.phase(), CalibrationPhase::Calibrated);
    }

    #[test]
    fn finish_with_two_axes_reports_missing_z() {
        let mut s = replay_session();
        feed(&mut s, sweep_messages(Axis::X, Vec3::x(), 0.15, 0.0));
        feed(&mut s, sweep_messages(Axis::Y, Vec3::y(), 0.15, 10.0));
        let reply = s.handle(ClientMessage::CalibControl(CalibControl::Finish));
        match &reply[..] {
            [ServerMessage::Error(e)] => {
                assert_eq!(e.code, ErrorCode::MissingAxis);
                assert_eq!(e.axis, Some(Axis::Z));
            }
            other => panic!("unexpected {other:?}"),
        }
        // the two good sweeps are kept: adding Z is enough
        feed(&mut s, sweep_messages(Axis::Z, Vec3::z(), 0.15, 20.0));
        assert!(matches!(s.handle(ClientMessage::CalibControl(CalibControl::Finish))[..], [ServerMessage::Calibration(_)]));
    }

    #[test]
    fn degenerate_sweep_can_be_retried() {
        let mut s = replay_session();
        feed(&mut s, sweep_messages(Axis::X, Vec3::x(), 0.15, 0.0));
        feed(&mut s, sweep_messages(Axis::Y, Vec3::y(), 0.025, 10.0));
        feed(&mut s, sweep_messages(Axis::Z, Vec3::z(), 0.15, 20.0));
        let reply = s.handle(ClientMessage::CalibControl(CalibControl::Finish));
        match &reply[..] {
            [ServerMessage::Error(e)] => {
                assert_eq!(e.code, ErrorCode::SweepDegenerate);
                assert_eq!(e.axis, Some(Axis::Y));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(s.phase(), CalibrationPhase::Uncalibrated);
        feed(&mut s, sweep_messages(Axis::Y, Vec3::y(), 0.15, 30.0));
        assert!(matches!(s.handle(ClientMessage::CalibControl(CalibControl::Finish))[..], [ServerMessage::Calibration(_)]));
        let (report, _) = s.finish();
        assert_eq!(report.calibration_attempts, 2);
        assert_eq!(report.calibration_failures, 1);
    }

    #[test]
    fn frames_before_calibration_are_rejected_with_reason() {
        let mut s = replay_session();
        let reply = s.handle(ClientMessage::HandFrame(HandFrame::new(0.0).with_right(hand(Vec3::zeros()))));
        assert!(matches!(&reply[..], [ServerMessage::Error(e)] if e.code == ErrorCode::NotCalibrated));
        let reply = s.handle_line("{not json");
        assert!(matches!(&reply[..], [ServerMessage::Error(e)] if e.code == ErrorCode::ParseError));
        let reply = s.handle_line(r#"{"t":-1.0,"right":null,"left":null}"#);
        assert!(matches!(&reply[..], [ServerMessage::Error(e)] if e.code == ErrorCode::TimestampRegression));
        assert!(s.handle_line(r#"{"type":"calib_control","action":"end_axis"}"#).len() == 1);
        let (report, _) = s.finish();
        assert_eq!(report.messages, 4);
        assert_eq!(report.rejected_messages, 4);
    }

    #[test]
    fn state_messages_carry_increasing_timestamps() {
        let cfg = SessionConfig {
            listen: Some("127.0.0.1:0".into()),
            ..Default::default()
        };
        let mut s = Session::new(&cfg, None, Clock::External).unwrap();
        let mut last = f64::NEG_INFINITY;
        for _ in 0..100 {
            match s.tick() {
                ServerMessage::EngineState(m) => {
                    assert!(m.t > last);
                    assert!(!m.engaged);
                    assert_eq!(m.calibration_phase, CalibrationPhase::Uncalibrated);
                    last = m.t;
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!((last - 1.0).abs() < 1e-9);
    }
}
