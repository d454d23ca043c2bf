//! Live session server.
//!
//! One control thread owns the [`Session`] and ticks it at the scenario step,
//! paced to wall-clock time. Operator input arrives over a websocket at `/ws`
//! and reaches the control thread only through an [`InputMailbox`]; state
//! leaves through a broadcast of decimated snapshots. Everything else under
//! `/` is served from an asset directory.

pub mod protocol;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use corrective_core::session::{
    write_line, InputMailbox, Session, SessionTrace, TraceError, TraceLine, DEFAULT_DEVICE_RANGE,
};
use futures::{SinkExt, StreamExt};
use protocol::{to_user_input, ClientMessage, ServerMessage, StateMessage, WIRE_SCHEMA_VERSION};
use std::collections::VecDeque;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use thiserror::Error;
use tokio::sync::{broadcast, watch};
use tower_http::services::ServeDir;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace: {0}")]
    Trace(#[from] TraceError),
    #[error("control thread panicked")]
    ControlPanicked,
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    /// Simulated seconds per wall-clock second; infinite runs unpaced.
    pub speed: f64,
    /// State frames per simulated second.
    pub state_rate: f64,
    /// Trace file, written as the session runs.
    pub record: Option<PathBuf>,
    /// Directory served under `/`.
    pub assets: Option<PathBuf>,
    /// Hold the first tick until a client connects.
    pub wait_for_client: bool,
    /// States kept for history requests.
    pub history: usize,
    pub device_range: f64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], 0)),
            speed: 1.0,
            state_rate: 60.0,
            record: None,
            assets: None,
            wait_for_client: false,
            history: 60 * 600,
            device_range: DEFAULT_DEVICE_RANGE,
        }
    }
}

struct Shared {
    mailbox: InputMailbox,
    updates: broadcast::Sender<Arc<ServerMessage>>,
    hello: ServerMessage,
    history: Mutex<VecDeque<StateMessage>>,
    history_capacity: usize,
    ended: Mutex<Option<ServerMessage>>,
    connected: AtomicBool,
    shutdown: watch::Receiver<bool>,
}

impl Shared {
    fn publish(&self, msg: ServerMessage) {
        if let ServerMessage::State(s) = &msg {
            let mut h = self.history.lock().unwrap_or_else(|e| e.into_inner());
            if h.len() == self.history_capacity {
                h.pop_front();
            }
            h.push_back(s.as_ref().clone());
        }
        if let ServerMessage::Ended { .. } = &msg {
            *self.ended.lock().unwrap_or_else(|e| e.into_inner()) = Some(msg.clone());
        }
        // no receivers is fine
        let _ = self.updates.send(Arc::new(msg));
    }
}

/// A server with its session running.
pub struct RunningServer {
    addr: SocketAddr,
    control: std::thread::JoinHandle<Result<SessionTrace, ServerError>>,
    http: tokio::task::JoinHandle<std::io::Result<()>>,
    stop: watch::Sender<bool>,
}

impl RunningServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Waits for the session to end, closes all connections and returns the trace.
    pub async fn finish(self) -> Result<SessionTrace, ServerError> {
        let control = self.control;
        let trace = tokio::task::spawn_blocking(move || control.join())
            .await
            .map_err(|_| ServerError::ControlPanicked)?
            .map_err(|_| ServerError::ControlPanicked)?;
        let _ = self.stop.send(true);
        match self.http.await {
            Ok(r) => r?,
            Err(_) => log::warn!("http task did not shut down cleanly"),
        }
        trace
    }
}

/// Binds the endpoint and starts the control thread. Must be called from
/// within a tokio runtime.
pub async fn start(session: Session, config: ServeConfig) -> Result<RunningServer, ServerError> {
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    let addr = listener.local_addr()?;
    let header = session.header();
    let (updates, _) = broadcast::channel(1024);
    let (stop, shutdown) = watch::channel(false);
    let shared = Arc::new(Shared {
        mailbox: InputMailbox::new(),
        updates,
        hello: ServerMessage::Hello {
            schema_version: WIRE_SCHEMA_VERSION,
            scenario: header.scenario.clone(),
            dt: header.dt,
            state_rate: config.state_rate,
            device_range: config.device_range,
            segments: header.segments.clone(),
        },
        history: Mutex::new(VecDeque::new()),
        history_capacity: config.history.max(1),
        ended: Mutex::new(None),
        connected: AtomicBool::new(false),
        shutdown: shutdown.clone(),
    });

    let mut router = Router::new().route("/ws", get(ws_route));
    router = match &config.assets {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router.fallback(get(placeholder)),
    };
    let app = router.with_state(shared.clone());
    let mut stop_rx = shutdown;
    let http = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = stop_rx.wait_for(|s| *s).await;
            })
            .await
    });

    let control = std::thread::Builder::new()
        .name("control".into())
        .spawn(move || control_loop(session, shared, config))?;
    log::info!("serving on http://{addr}");
    Ok(RunningServer {
        addr,
        control,
        http,
        stop,
    })
}

fn control_loop(mut session: Session, shared: Arc<Shared>, config: ServeConfig) -> Result<SessionTrace, ServerError> {
    let header = session.header();
    let mut sink = match &config.record {
        Some(path) => {
            let mut w = BufWriter::new(std::fs::File::create(path)?);
            write_line(&mut w, &TraceLine::Header(header.clone()))?;
            Some(w)
        }
        None => None,
    };
    if config.wait_for_client {
        log::info!("waiting for an operator to connect");
        while !shared.connected.load(Ordering::Acquire) {
            std::thread::sleep(Duration::from_millis(5));
        }
    }

    let dt = session.dt();
    // a tick is published when it opens a new 1/state_rate slot, which keeps
    // the average rate exact even when it does not divide the tick rate
    let rate = config.state_rate.max(f64::MIN_POSITIVE);
    let slot = |tick: u64| (tick as f64 * dt * rate + 1e-9).floor() as u64;
    let due = |tick: u64| tick == 0 || slot(tick) != slot(tick - 1);
    let paced = config.speed.is_finite() && config.speed > 0.0;
    let mut source = shared.mailbox.clone();
    let mut records = Vec::new();
    let mut write_err = None;
    let start = Instant::now();
    let mut n: u64 = 0;
    let mappings: Vec<_> = session.plan().segments.iter().map(|seg| session.plan().input_mapping(seg)).collect();
    session.run_with(&mut source, |r| {
        if paced {
            let at = start + Duration::from_secs_f64(n as f64 * dt / config.speed);
            if let Some(wait) = at.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        n += 1;
        if let Some(w) = sink.as_mut() {
            if let Err(e) = write_line(w, &TraceLine::Record(r.clone())) {
                log::error!("trace write failed: {e}");
                write_err.get_or_insert(e);
                sink = None;
            }
        }
        if due(r.tick) {
            let state = StateMessage::from_record(r, &mappings[r.segment_index]);
            shared.publish(ServerMessage::State(Box::new(state)));
            if let Some(w) = sink.as_mut() {
                let _ = w.flush();
            }
        }
        records.push(r.clone());
    });
    let footer = session.footer();
    if let Some(last) = records.last() {
        if !due(last.tick) {
            let state = StateMessage::from_record(last, &mappings[last.segment_index]);
            shared.publish(ServerMessage::State(Box::new(state)));
        }
    }
    shared.publish(ServerMessage::Ended {
        completed: footer.completed,
        fault: footer.fault.clone(),
        ticks: footer.ticks,
    });
    if let Some(mut w) = sink {
        write_line(&mut w, &TraceLine::Footer(footer.clone()))?;
        w.flush()?;
    }
    if let Some(e) = write_err {
        return Err(e.into());
    }
    Ok(SessionTrace {
        header,
        records,
        footer: Some(footer),
    })
}

async fn placeholder() -> Html<&'static str> {
    Html(
        "<!doctype html><title>corrective</title>\
         <p>Session server is running. Operator UI assets were not configured; \
         connect a client to <code>/ws</code>.</p>",
    )
}

async fn ws_route(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| operator(socket, shared))
}

fn frame(msg: &ServerMessage) -> Message {
    Message::Text(serde_json::to_string(msg).expect("server messages serialize").into())
}

async fn operator(socket: WebSocket, shared: Arc<Shared>) {
    let (mut tx, mut rx) = socket.split();
    let mut updates = shared.updates.subscribe();
    let mut shutdown = shared.shutdown.clone();
    if tx.send(frame(&shared.hello)).await.is_err() {
        return;
    }
    let ended = shared.ended.lock().unwrap_or_else(|e| e.into_inner()).clone();
    if let Some(end) = ended {
        let _ = tx.send(frame(&end)).await;
    }
    shared.connected.store(true, Ordering::Release);
    log::info!("operator connected");

    loop {
        tokio::select! {
            incoming = rx.next() => {
                let reply = match incoming {
                    Some(Ok(Message::Text(text))) => handle(&shared, text.as_str()),
                    Some(Ok(Message::Binary(_))) => Some(ServerMessage::Error { message: "binary frames are not supported".into() }),
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => None,
                };
                if let Some(reply) = reply {
                    if tx.send(frame(&reply)).await.is_err() {
                        break;
                    }
                }
            }
            update = updates.recv() => match update {
                Ok(msg) => {
                    if tx.send(frame(&msg)).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(skipped)) => log::debug!("client lagging, skipped {skipped} states"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
            _ = async { shutdown.wait_for(|s| *s).await.is_ok() } => {
                let _ = tx.send(Message::Close(None)).await;
                break;
            }
        }
    }
    // a vanished operator lets go of the device
    shared.mailbox.clear();
    log::info!("operator disconnected");
}

fn handle(shared: &Shared, text: &str) -> Option<ServerMessage> {
    match ClientMessage::parse(text) {
        Ok(ClientMessage::Input {
            t_client, u, overrides, ..
        }) => {
            if !shared.mailbox.post(to_user_input(t_client, u, overrides)) {
                log::debug!("stale input at {t_client} dropped");
            }
            None
        }
        Ok(ClientMessage::HistoryRequest { since_tick, .. }) => {
            let h = shared.history.lock().unwrap_or_else(|e| e.into_inner());
            let from = since_tick.unwrap_or(0);
            Some(ServerMessage::History {
                states: h.iter().filter(|s| s.tick >= from).cloned().collect(),
            })
        }
        Err(message) => Some(ServerMessage::Error { message }),
    }
}
