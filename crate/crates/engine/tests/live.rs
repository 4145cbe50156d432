use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::oneshot;
use tokio_tungstenite::tungstenite::Message;

use retarget_core::calibration::{synthetic_sweep, Axis};
use retarget_core::hand::{synthetic_keypoints, HandFrame, HandObservation};
use retarget_core::{RotationMatrix, Vec3};
use retarget_engine::protocol::{CalibControl, CalibrationPhase, ClientMessage, ErrorCode, ServerMessage};
use retarget_engine::server::serve;
use retarget_engine::{SessionConfig, SessionReport, Transport};

fn hand(p: Vec3) -> HandObservation {
    HandObservation {
        keypoints: synthetic_keypoints([320.0, 240.0], 90.0, 110.0),
        wrist_position_c: p,
        wrist_rotation_c: RotationMatrix::identity(),
        confidence: 1.0,
    }
}

fn calibration_lines(skip_z: bool) -> Vec<String> {
    let mut lines = Vec::new();
    for (i, (axis, d)) in Axis::ALL.into_iter().zip([Vec3::x(), Vec3::y(), Vec3::z()]).enumerate() {
        if skip_z && axis == Axis::Z {
            continue;
        }
        lines.push(ClientMessage::CalibControl(CalibControl::BeginAxis { axis }).to_line());
        for s in synthetic_sweep(axis, Vec3::new(0.0, 0.0, 0.6), d, 0.15, 40, 5.0 * i as f64).samples {
            lines.push(ClientMessage::HandFrame(HandFrame::new(s.t).with_right(hand(s.position))).to_line());
        }
        lines.push(ClientMessage::CalibControl(CalibControl::EndAxis).to_line());
    }
    lines.push(ClientMessage::CalibControl(CalibControl::Finish).to_line());
    lines
}

async fn start(
    transport: Transport,
    record: Option<std::path::PathBuf>,
) -> (String, oneshot::Sender<()>, tokio::task::JoinHandle<SessionReport>) {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let cfg = SessionConfig {
        listen: Some(addr.clone()),
        transport,
        record,
        ..Default::default()
    };
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let handle = tokio::spawn(async move {
        serve(cfg, listener, async {
            let _ = stop_rx.await;
        })
        .await
        .unwrap()
        .0
    });
    (addr, stop_tx, handle)
}

fn parse(line: &str) -> ServerMessage {
    serde_json::from_str(line).unwrap_or_else(|e| panic!("bad server line {line}: {e}"))
}

#[tokio::test]
async fn tcp_session_calibrates_and_streams_state() {
    let dir = tempfile::tempdir().unwrap();
    let record = dir.path().join("live.jsonl");
    let (addr, stop, handle) = start(Transport::Tcp, Some(record.clone())).await;
    let stream = TcpStream::connect(&addr).await.unwrap();
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();

    let first = parse(&lines.next_line().await.unwrap().unwrap());
    assert!(matches!(first, ServerMessage::Session(s) if s.tick == 0.01));

    let sent = calibration_lines(false);
    let mut payload = sent.join("\n");
    payload.push('\n');
    write.write_all(payload.as_bytes()).await.unwrap();

    let mut calibrated = false;
    let mut last_t = f64::NEG_INFINITY;
    let mut states = 0;
    let deadline = tokio::time::Instant::now() + Duration::from_secs(10);
    while tokio::time::Instant::now() < deadline && !(calibrated && states > 50) {
        let line = tokio::time::timeout(Duration::from_secs(5), lines.next_line()).await.unwrap().unwrap().unwrap();
        match parse(&line) {
            ServerMessage::EngineState(s) => {
                assert!(s.t > last_t, "timestamps must increase");
                last_t = s.t;
                states += 1;
                if calibrated {
                    assert_eq!(s.calibration_phase, CalibrationPhase::Calibrated);
                }
            }
            ServerMessage::Calibration(c) => {
                assert!(c.report.warnings.is_empty());
                calibrated = true;
            }
            ServerMessage::Error(e) => panic!("unexpected error {e:?}"),
            ServerMessage::Session(_) => panic!("second hello"),
        }
    }
    assert!(calibrated);

    // a frame after calibration engages the retargeter
    let frame = ClientMessage::HandFrame(HandFrame::new(20.0).with_right(hand(Vec3::new(0.0, 0.0, 0.6))));
    write.write_all(format!("{}\n", frame.to_line()).as_bytes()).await.unwrap();
    let mut engaged = false;
    for _ in 0..200 {
        let line = lines.next_line().await.unwrap().unwrap();
        if let ServerMessage::EngineState(s) = parse(&line) {
            if s.engaged {
                engaged = true;
                assert_eq!(s.alpha, 0.3);
                break;
            }
        }
    }
    assert!(engaged);

    stop.send(()).unwrap();
    let report = handle.await.unwrap();
    assert!(report.calibrated);
    assert_eq!(report.messages as usize, sent.len() + 1);

    let recorded = std::fs::read_to_string(&record).unwrap();
    let mut expected = sent.clone();
    expected.push(frame.to_line());
    assert_eq!(recorded.lines().collect::<Vec<_>>(), expected);
}

#[tokio::test]
async fn websocket_session_reports_structured_calibration_errors() {
    let (addr, stop, handle) = start(Transport::Websocket, None).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}")).await.unwrap();

    let hello = ws.next().await.unwrap().unwrap();
    assert!(matches!(parse(hello.to_text().unwrap()), ServerMessage::Session(_)));

    // several lines in one text frame are split on newlines
    ws.send(Message::text(calibration_lines(true).join("\n"))).await.unwrap();
    ws.send(Message::text("garbage")).await.unwrap();

    let mut errors = Vec::new();
    let deadline = tokio::time::Instant::now() + Duration::from_secs(10);
    while errors.len() < 2 && tokio::time::Instant::now() < deadline {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.unwrap().unwrap().unwrap();
        if let ServerMessage::Error(e) = parse(msg.to_text().unwrap()) {
            errors.push(e);
        }
    }
    assert_eq!(errors[0].code, ErrorCode::MissingAxis);
    assert_eq!(errors[0].axis, Some(Axis::Z));
    assert_eq!(errors[1].code, ErrorCode::ParseError);

    // the session is still alive and uncalibrated
    loop {
        let msg = ws.next().await.unwrap().unwrap();
        if let ServerMessage::EngineState(s) = parse(msg.to_text().unwrap()) {
            assert_eq!(s.calibration_phase, CalibrationPhase::Uncalibrated);
            break;
        }
    }
    ws.close(None).await.unwrap();
    stop.send(()).unwrap();
    let report = handle.await.unwrap();
    assert!(!report.calibrated);
    assert_eq!(report.calibration_failures, 1);
}

#[tokio::test]
async fn broadcast_cadence_follows_the_servo_tick() {
    let (addr, stop, handle) = start(Transport::Tcp, None).await;
    let stream = TcpStream::connect(&addr).await.unwrap();
    let mut lines = BufReader::new(stream).lines();
    lines.next_line().await.unwrap();
    let start = tokio::time::Instant::now();
    let mut ts = Vec::new();
    while start.elapsed() < Duration::from_millis(1000) {
        if let ServerMessage::EngineState(s) = parse(&lines.next_line().await.unwrap().unwrap()) {
            ts.push(s.t);
        }
    }
    stop.send(()).unwrap();
    handle.await.unwrap();
    assert!(ts.windows(2).all(|w| (w[1] - w[0] - 0.01).abs() < 1e-9));
    // 100 Hz within generous scheduling tolerance
    assert!(ts.len() >= 50 && ts.len() <= 150, "{} states in one second", ts.len());
}
