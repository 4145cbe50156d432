use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use retarget_core::calibration::{calibrate, synthetic_sweep, Axis, OperatorFrames};
use retarget_core::hand::{read_frames, synthetic_keypoints, write_frames, HandFrame, HandObservation};
use retarget_core::retarget::RetargetConfig;
use retarget_core::sim::{run_closed_loop, run_episode, InsertionScript, Scenario, ScriptedInserter, ServoConfig};
use retarget_core::{RotationMatrix, Vec3};

fn skewed_frames() -> OperatorFrames {
    let dirs = [Vec3::new(1.0, 0.05, 0.0), Vec3::new(0.25, 1.0, 0.1), Vec3::new(0.0, 0.1, 1.0)];
    let sweeps: Vec<_> = Axis::ALL
        .iter()
        .zip(dirs)
        .map(|(a, d)| synthetic_sweep(*a, Vec3::new(0.0, 0.05, 0.6), d, 0.15, 60, 5.0 * a.index() as f64))
        .collect();
    calibrate(&sweeps, &Default::default()).unwrap()
}

fn wandering_stream(seed: u64, n: usize) -> Vec<HandFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Vec3::new(0.0, 0.0, 0.6);
    (0..n)
        .map(|k| {
            p += Vec3::new(rng.random_range(-0.005..0.005), rng.random_range(-0.005..0.005), rng.random_range(-0.005..0.005));
            let right = HandObservation {
                keypoints: synthetic_keypoints([320.0, 240.0], rng.random_range(10.0..90.0), 110.0),
                wrist_position_c: p,
                wrist_rotation_c: RotationMatrix::from_euler_angles(0.01 * k as f64, 0.2, -0.1),
                confidence: rng.random_range(0.5..1.0),
            };
            let mut frame = HandFrame::new(k as f64 / 30.0).with_right(right);
            if k % 50 > 25 {
                let mut left = right;
                left.wrist_position_c = Vec3::new(-0.2, 0.1, 0.6);
                frame.left = Some(left);
            }
            frame
        })
        .collect()
}

#[test]
fn stream_file_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("frames.jsonl");
    let frames = wandering_stream(1, 300);
    write_frames(&path, &frames).unwrap();
    assert_eq!(read_frames(&path).unwrap(), frames);
}

#[test]
fn recorded_stream_replays_to_identical_episode() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("frames.jsonl");
    let frames = skewed_frames();
    let stream = wandering_stream(2, 600);
    write_frames(&path, &stream).unwrap();

    let (cfg, servo, scenario) = (RetargetConfig::default(), ServoConfig::default(), Scenario::pick_place());
    let live = run_episode(&stream, &frames, &cfg, &servo, &scenario).unwrap();
    let replayed = run_episode(&read_frames(&path).unwrap(), &frames, &cfg, &servo, &scenario).unwrap();
    assert_eq!(live.report, replayed.report);
    assert_eq!(live.trajectory, replayed.trajectory);
    assert!(live.report.ee_displacement > 0.0);
}

#[test]
fn calibrated_frames_serialize_losslessly() {
    let frames = skewed_frames();
    let text = serde_json::to_string(&frames).unwrap();
    assert_eq!(serde_json::from_str::<OperatorFrames>(&text).unwrap(), frames);
}

#[test]
fn closed_loop_insertion_recording_replays() {
    let frames = skewed_frames();
    let (cfg, servo, scenario) = (RetargetConfig::default(), ServoConfig::default(), Scenario::peg_in_hole());
    let script = InsertionScript {
        seed: 9,
        ..Default::default()
    };
    let mut operator = ScriptedInserter::new(script, frames, cfg, &scenario);
    let (episode, recorded) = run_closed_loop(&mut operator, &frames, &cfg, &servo, &scenario, 300.0).unwrap();
    assert!(episode.report.success, "{:?}", episode.report);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("insertion.jsonl");
    write_frames(&path, &recorded).unwrap();
    let replayed = run_episode(&read_frames(&path).unwrap(), &frames, &cfg, &servo, &scenario).unwrap();
    assert_eq!(replayed.report, episode.report);
}
