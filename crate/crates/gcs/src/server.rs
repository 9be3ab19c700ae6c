//! Console socket, metadata endpoint and the task that drives a live mission.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use hmt_core::bus::Millis;
use hmt_core::gcs::Frame;
use hmt_core::harness::{HarnessError, Lifecycle, Mission, CONSOLE_SENDER};
use hmt_core::message::CommandResult;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, watch};
use tokio::time::{Instant, MissedTickBehavior};

use crate::protocol::{ClientMessage, MissionMetadata, ServerMessage};

const CONTROL_QUEUE: usize = 256;
const RESULT_QUEUE: usize = 256;

pub const METADATA_PATH: &str = "/api/mission";
pub const SOCKET_PATH: &str = "/ws";

/// How the driver maps wall time onto mission time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pace {
    /// One lockstep tick per `period` of wall time.
    Lockstep { period: Duration },
    /// Mission time follows wall time, minus time spent paused.
    Realtime,
}

struct Shared {
    metadata: MissionMetadata,
    frames: watch::Receiver<Arc<Frame>>,
    results: broadcast::Sender<CommandResult>,
    control: mpsc::Sender<ClientMessage>,
}

pub fn router(
    metadata: MissionMetadata,
    frames: watch::Receiver<Arc<Frame>>,
    results: broadcast::Sender<CommandResult>,
    control: mpsc::Sender<ClientMessage>,
) -> Router {
    let shared = Arc::new(Shared {
        metadata,
        frames,
        results,
        control,
    });
    Router::new()
        .route(METADATA_PATH, get(metadata_handler))
        .route(SOCKET_PATH, get(socket_handler))
        .with_state(shared)
}

async fn metadata_handler(State(s): State<Arc<Shared>>) -> Json<MissionMetadata> {
    Json(s.metadata.clone())
}

async fn socket_handler(ws: WebSocketUpgrade, State(s): State<Arc<Shared>>) -> Response {
    ws.on_upgrade(move |socket| console_session(socket, s))
        .into_response()
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    let text = serde_json::to_string(msg).expect("server messages serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

async fn console_session(mut socket: WebSocket, s: Arc<Shared>) {
    let mut frames = s.frames.clone();
    let mut results = s.results.subscribe();
    let first = Arc::clone(&frames.borrow_and_update());
    if !send(&mut socket, &ServerMessage::Frame { frame: first }).await {
        return;
    }
    let mut frames_open = true;
    let mut results_open = true;
    loop {
        tokio::select! {
            changed = frames.changed(), if frames_open => {
                if changed.is_err() {
                    frames_open = false;
                    continue;
                }
                // Latest wins: a slow client skips straight to the newest frame.
                let frame = Arc::clone(&frames.borrow_and_update());
                if !send(&mut socket, &ServerMessage::Frame { frame }).await {
                    break;
                }
            }
            r = results.recv(), if results_open => match r {
                Ok(result) => {
                    if !send(&mut socket, &ServerMessage::CommandResult { result }).await {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => tracing::warn!(skipped = n, "console fell behind on command results"),
                Err(broadcast::error::RecvError::Closed) => results_open = false,
            },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(text))) => match ClientMessage::parse(&text) {
                    Ok(m) => {
                        if s.control.send(m).await.is_err() {
                            let message = "mission has ended".to_string();
                            if !send(&mut socket, &ServerMessage::Error { message }).await {
                                break;
                            }
                        }
                    }
                    Err(e) => {
                        if !send(&mut socket, &ServerMessage::Error { message: format!("malformed message: {e}") }).await {
                            break;
                        }
                    }
                },
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

/// Steps a mission against the wall clock, applying console messages between steps.
pub struct Driver {
    mission: Mission,
    pace: Pace,
    control: mpsc::Receiver<ClientMessage>,
    results: broadcast::Sender<CommandResult>,
}

impl Driver {
    pub fn new(
        mission: Mission,
        pace: Pace,
    ) -> (
        Self,
        mpsc::Sender<ClientMessage>,
        broadcast::Sender<CommandResult>,
    ) {
        let (control_tx, control) = mpsc::channel(CONTROL_QUEUE);
        let (results, _) = broadcast::channel(RESULT_QUEUE);
        (
            Driver {
                mission,
                pace,
                control,
                results: results.clone(),
            },
            control_tx,
            results,
        )
    }

    pub fn frames(&self) -> watch::Receiver<Arc<Frame>> {
        self.mission.subscribe_frames()
    }

    fn apply(&mut self, m: ClientMessage) -> Result<(), HarnessError> {
        let r = match m {
            ClientMessage::Command(c) => self.mission.submit(CONSOLE_SENDER, c),
            ClientMessage::Pause => self.mission.pause(),
            ClientMessage::Resume => self.mission.resume(),
            ClientMessage::Abort => self.mission.abort(),
        };
        match r {
            Err(HarnessError::NotRunning) => {
                tracing::warn!(
                    "lifecycle request ignored in state {:?}",
                    self.mission.status()
                );
                Ok(())
            }
            other => other,
        }
    }

    /// Runs until the mission finishes and hands it back.
    pub async fn run(mut self) -> Result<Mission, HarnessError> {
        let tick = Duration::from_millis(self.mission.spec().tick_ms);
        let period = match self.pace {
            Pace::Lockstep { period } => period.max(Duration::from_micros(50)),
            Pace::Realtime => tick,
        };
        let mut interval = tokio::time::interval(period);
        interval.set_missed_tick_behavior(MissedTickBehavior::Skip);
        let start = Instant::now();
        let mut paused_for = Duration::ZERO;
        let mut paused_since: Option<Instant> = None;
        loop {
            interval.tick().await;
            while let Ok(m) = self.control.try_recv() {
                self.apply(m)?;
            }
            match (self.mission.status(), paused_since) {
                (Lifecycle::Paused, None) => paused_since = Some(Instant::now()),
                (Lifecycle::Running, Some(since)) => {
                    paused_for += since.elapsed();
                    paused_since = None;
                }
                _ => {}
            }
            let more = match self.pace {
                Pace::Lockstep { .. } => self.mission.step()?,
                Pace::Realtime => {
                    let now = (start.elapsed().saturating_sub(paused_for)).as_millis() as Millis;
                    self.mission.step_realtime(now)?
                }
            };
            for r in self.mission.take_results() {
                let _ = self.results.send(r);
            }
            if !more {
                return Ok(self.mission);
            }
        }
    }
}

/// A mission served on a socket: the bound address and the driver task.
pub struct Served {
    pub addr: SocketAddr,
    pub mission: tokio::task::JoinHandle<Result<Mission, HarnessError>>,
    pub server: tokio::task::JoinHandle<std::io::Result<()>>,
}

/// Binds `addr`, starts serving the console and starts the mission driver.
pub async fn serve(
    mission: Mission,
    pace: Pace,
    metadata: MissionMetadata,
    addr: SocketAddr,
) -> std::io::Result<Served> {
    let (driver, control, results) = Driver::new(mission, pace);
    let app = router(metadata, driver.frames(), results, control);
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let server = tokio::spawn(async move { axum::serve(listener, app).await });
    let mission = tokio::spawn(driver.run());
    Ok(Served {
        addr,
        mission,
        server,
    })
}
