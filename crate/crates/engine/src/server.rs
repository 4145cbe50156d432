//! Live endpoint: one duplex connection per client carrying newline-delimited
//! JSON, over raw TCP or WebSocket text frames.
//!
//! Connections only parse bytes into lines. Every line goes through one
//! queue into the single engine loop, which also owns the tick timer and
//! broadcasts everything it emits to all connections.

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::Message;

use retarget_core::sim::TrajectorySample;

use crate::config::Transport;
use crate::replay::{initial_frames, Recorder};
use crate::session::{Clock, Session, SessionReport};
use crate::{EngineError, SessionConfig};

type BoxError = Box<dyn std::error::Error + Send + Sync>;

const BROADCAST_CAPACITY: usize = 4096;

/// Runs a live session on `listener` until `shutdown` resolves, then settles
/// the arm and returns the report and trajectory.
pub async fn serve(
    cfg: SessionConfig,
    listener: TcpListener,
    shutdown: impl Future<Output = ()>,
) -> Result<(SessionReport, Vec<TrajectorySample>), EngineError> {
    let mut session = Session::new(&cfg, initial_frames(&cfg)?, Clock::External)?;
    let mut recorder = cfg.record.as_deref().map(Recorder::create).transpose()?;
    let (in_tx, mut in_rx) = mpsc::unbounded_channel::<String>();
    let (out_tx, _) = broadcast::channel::<Arc<str>>(BROADCAST_CAPACITY);
    let hello: Arc<str> = session.hello().to_line().into();

    let accept = tokio::spawn(accept_loop(listener, cfg.transport, in_tx, out_tx.clone(), hello));

    let mut interval = tokio::time::interval(Duration::from_secs_f64(cfg.servo.tick));
    interval.set_missed_tick_behavior(MissedTickBehavior::Burst);
    tokio::pin!(shutdown);
    loop {
        tokio::select! {
            biased;
            _ = &mut shutdown => break,
            Some(line) = in_rx.recv() => {
                if let Some(r) = recorder.as_mut() {
                    r.record(&line)?;
                }
                for reply in session.handle_line(&line) {
                    let _ = out_tx.send(reply.to_line().into());
                }
            }
            _ = interval.tick() => {
                let _ = out_tx.send(session.tick().to_line().into());
            }
        }
    }
    accept.abort();
    Ok(session.finish())
}

async fn accept_loop(
    listener: TcpListener,
    transport: Transport,
    in_tx: mpsc::UnboundedSender<String>,
    out_tx: broadcast::Sender<Arc<str>>,
    hello: Arc<str>,
) {
    loop {
        let (stream, peer) = match listener.accept().await {
            Ok(conn) => conn,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        log::info!("client {peer} connected");
        let in_tx = in_tx.clone();
        let out_rx = out_tx.subscribe();
        let hello = hello.clone();
        tokio::spawn(async move {
            let result = match transport {
                Transport::Tcp => serve_tcp(stream, in_tx, out_rx, hello).await,
                Transport::Websocket => serve_websocket(stream, in_tx, out_rx, hello).await,
            };
            match result {
                Ok(()) => log::info!("client {peer} disconnected"),
                Err(e) => log::info!("client {peer} dropped: {e}"),
            }
        });
    }
}

/// Next outbound message; `None` once the engine is gone.
async fn next_outbound(out_rx: &mut broadcast::Receiver<Arc<str>>) -> Option<Arc<str>> {
    loop {
        match out_rx.recv().await {
            Ok(msg) => return Some(msg),
            Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("slow client skipped {n} messages"),
            Err(broadcast::error::RecvError::Closed) => return None,
        }
    }
}

async fn serve_tcp(
    stream: TcpStream,
    in_tx: mpsc::UnboundedSender<String>,
    mut out_rx: broadcast::Receiver<Arc<str>>,
    hello: Arc<str>,
) -> Result<(), BoxError> {
    let (read, mut write) = stream.into_split();
    let reader = async move {
        let mut lines = BufReader::new(read).lines();
        while let Some(line) = lines.next_line().await? {
            if in_tx.send(line).is_err() {
                break;
            }
        }
        Ok::<_, BoxError>(())
    };
    let writer = async move {
        write.write_all(format!("{hello}\n").as_bytes()).await?;
        while let Some(msg) = next_outbound(&mut out_rx).await {
            write.write_all(msg.as_bytes()).await?;
            write.write_all(b"\n").await?;
        }
        Ok::<_, BoxError>(())
    };
    tokio::select! {
        r = reader => r,
        w = writer => w,
    }
}

async fn serve_websocket(
    stream: TcpStream,
    in_tx: mpsc::UnboundedSender<String>,
    mut out_rx: broadcast::Receiver<Arc<str>>,
    hello: Arc<str>,
) -> Result<(), BoxError> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut sink, mut source) = ws.split();
    let reader = async move {
        while let Some(msg) = source.next().await {
            match msg? {
                Message::Text(text) => {
                    for line in text.as_str().lines() {
                        if in_tx.send(line.to_string()).is_err() {
                            return Ok(());
                        }
                    }
                }
                Message::Close(_) => break,
                _ => {}
            }
        }
        Ok::<_, BoxError>(())
    };
    let writer = async move {
        sink.send(Message::text(hello.as_ref())).await?;
        while let Some(msg) = next_outbound(&mut out_rx).await {
            sink.send(Message::text(msg.as_ref())).await?;
        }
        Ok::<_, BoxError>(())
    };
    tokio::select! {
        r = reader => r,
        w = writer => w,
    }
}
