//! WebSocket and HTTP front end. Each session runs in its own task that owns
//! the pipeline; connections talk to it over a channel and receive events
//! from a bounded broadcast.

use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::Instant;

use crate::config::Config;
use crate::protocol::{
    error_reply, parse_client, ClientEnvelope, ClientMessage, Envelope, OpenSession, ServerEnvelope, ServerMessage,
};
use crate::session::{Outgoing, Session, SessionLog};

/// Events buffered per session before a slow subscriber is cut off.
pub const BROADCAST_CAPACITY: usize = 4096;
const CONNECTION_QUEUE: usize = 256;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub config: Config,
    /// Zero simulated action durations and no wall-clock pacing.
    pub fast: bool,
    pub record_dir: Option<PathBuf>,
    pub heartbeat: Duration,
}

impl ServeOptions {
    pub fn new(config: Config) -> Self {
        Self {
            config,
            fast: false,
            record_dir: None,
            heartbeat: Duration::from_secs(5),
        }
    }
}

enum Request {
    Message(ClientEnvelope, oneshot::Sender<Vec<String>>),
    Snapshot(oneshot::Sender<Result<String, String>>),
}

#[derive(Clone)]
struct SessionHandle {
    tx: mpsc::Sender<Request>,
    events: broadcast::Sender<Arc<str>>,
}

struct AppState {
    opts: ServeOptions,
    sessions: Mutex<HashMap<String, SessionHandle>>,
    next_id: AtomicU64,
}

type Shared = Arc<AppState>;

fn text(env: &ServerEnvelope) -> String {
    serde_json::to_string(env).expect("serializable")
}

impl AppState {
    fn lookup(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.lock().expect("registry lock").get(id).cloned()
    }

    fn open(&self, seq: Option<u64>, open: &OpenSession) -> Result<(SessionHandle, Vec<Outgoing>), ServerMessage> {
        let n = self.next_id.fetch_add(1, Ordering::Relaxed) + 1;
        let id = format!("s{n}");
        let log = match &self.opts.record_dir {
            Some(dir) => match SessionLog::create(&dir.join(format!("{id}.ndjson"))) {
                Ok(l) => Some(l),
                Err(e) => return Err(error_reply("io", format!("cannot create session log: {e}"))),
            },
            None => None,
        };
        let time_scale = if self.opts.fast { 0.0 } else { 1.0 };
        let opened = Session::open(&id, seq, open, &self.opts.config, Some(time_scale), log)?;
        let (tx, rx) = mpsc::channel(CONNECTION_QUEUE);
        let (events, _) = broadcast::channel(BROADCAST_CAPACITY);
        let handle = SessionHandle {
            tx,
            events: events.clone(),
        };
        tokio::spawn(run_session(opened.session, rx, events, !self.opts.fast));
        self.sessions.lock().expect("registry lock").insert(id.clone(), handle.clone());
        tracing::info!(session = %id, "session opened");
        Ok((handle, opened.outputs))
    }
}

/// Single writer for one session. Events of one batch are released on the
/// wall clock according to their simulated timestamps unless `paced` is off.
async fn run_session(
    mut session: Session,
    mut rx: mpsc::Receiver<Request>,
    events: broadcast::Sender<Arc<str>>,
    paced: bool,
) {
    while let Some(req) = rx.recv().await {
        match req {
            Request::Message(env, reply) => {
                let mut replies = Vec::new();
                let mut clock: Option<(Instant, f64)> = None;
                for o in session.handle(&env) {
                    match o {
                        Outgoing::Reply(e) => replies.push(text(&e)),
                        Outgoing::Broadcast(e) => {
                            if let (true, ServerMessage::Event(ev)) = (paced, &e.body) {
                                match clock {
                                    None => clock = Some((Instant::now(), ev.t_sim)),
                                    Some((start, t0)) => {
                                        let dt = (ev.t_sim - t0).max(0.0);
                                        tokio::time::sleep_until(start + Duration::from_secs_f64(dt)).await;
                                    }
                                }
                            }
                            // No subscribers is not an error.
                            let _ = events.send(text(&e).into());
                        }
                    }
                }
                let _ = reply.send(replies);
            }
            Request::Snapshot(reply) => {
                let snap = session
                    .snapshot()
                    .map(|s| serde_json::to_string(&s).expect("serializable"))
                    .map_err(|e| text(&Envelope::new(e)));
                let _ = reply.send(snap);
            }
        }
    }
}

pub fn router(opts: ServeOptions) -> Router {
    let state = Arc::new(AppState {
        opts,
        sessions: Mutex::new(HashMap::new()),
        next_id: AtomicU64::new(0),
    });
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/sessions/{id}/scene", get(scene_snapshot))
        .route("/health", get(|| async { "ok" }))
        .with_state(state)
}

/// Serve on an already bound listener until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    opts: ServeOptions,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Some(dir) = &opts.record_dir {
        std::fs::create_dir_all(dir)?;
    }
    axum::serve(listener, router(opts)).with_graceful_shutdown(shutdown).await
}

async fn scene_snapshot(State(state): State<Shared>, Path(id): Path<String>) -> Response {
    let Some(handle) = state.lookup(&id) else {
        let body = text(&Envelope::new(error_reply("unknown_session", format!("no session `{id}`"))));
        return (StatusCode::NOT_FOUND, [(header::CONTENT_TYPE, "application/json")], body).into_response();
    };
    let (tx, rx) = oneshot::channel();
    if handle.tx.send(Request::Snapshot(tx)).await.is_err() {
        return StatusCode::GONE.into_response();
    }
    match rx.await {
        Ok(Ok(body)) => ([(header::CONTENT_TYPE, "application/json")], body).into_response(),
        Ok(Err(body)) => (StatusCode::INTERNAL_SERVER_ERROR, [(header::CONTENT_TYPE, "application/json")], body)
            .into_response(),
        Err(_) => StatusCode::GONE.into_response(),
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<Shared>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, state))
}

enum Outbound {
    Text(Arc<str>),
    Close,
}

/// Relay one session's broadcast to a connection. Falling behind the
/// broadcast buffer ends the subscription and closes the connection.
async fn forward(mut rx: broadcast::Receiver<Arc<str>>, out: mpsc::Sender<Outbound>) {
    loop {
        match rx.recv().await {
            Ok(t) => {
                if out.send(Outbound::Text(t)).await.is_err() {
                    return;
                }
            }
            Err(broadcast::error::RecvError::Lagged(n)) => {
                let msg = text(&Envelope::new(error_reply(
                    "lagged",
                    format!("subscriber fell {n} events behind; disconnecting"),
                )));
                let _ = out.send(Outbound::Text(msg.into())).await;
                let _ = out.send(Outbound::Close).await;
                return;
            }
            Err(broadcast::error::RecvError::Closed) => return,
        }
    }
}

async fn connection(socket: WebSocket, state: Shared) {
    let (mut sink, mut stream) = socket.split();
    let (out_tx, mut out_rx) = mpsc::channel::<Outbound>(CONNECTION_QUEUE);
    let heartbeat = state.opts.heartbeat;
    let writer = tokio::spawn(async move {
        loop {
            let next = tokio::time::timeout(heartbeat, out_rx.recv()).await;
            let msg = match next {
                Ok(Some(Outbound::Text(t))) => Message::Text(t.as_ref().into()),
                Ok(Some(Outbound::Close)) => {
                    let _ = sink.send(Message::Close(None)).await;
                    return;
                }
                Ok(None) => return,
                Err(_) => Message::Text(text(&Envelope::new(ServerMessage::Heartbeat {})).into()),
            };
            if sink.send(msg).await.is_err() {
                return;
            }
        }
    });

    let reply = |env: ServerEnvelope| Outbound::Text(text(&env).into());
    let mut forwarders: HashMap<String, tokio::task::JoinHandle<()>> = HashMap::new();
    while let Some(Ok(msg)) = stream.next().await {
        let raw = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            Message::Binary(_) => {
                let e = Envelope::new(error_reply("bad_message", "binary frames are not supported"));
                if out_tx.send(reply(e)).await.is_err() {
                    break;
                }
                continue;
            }
            _ => continue,
        };
        let env = match parse_client(raw.as_str()) {
            Ok(env) => env,
            Err((seq, e)) => {
                if out_tx.send(reply(Envelope::new(ServerMessage::Error(e)).with_seq(seq))).await.is_err() {
                    break;
                }
                continue;
            }
        };
        let seq = env.seq;
        let mut outbound = Vec::new();
        match &env.body {
            ClientMessage::OpenSession(open) => match state.open(seq, open) {
                Ok((handle, outputs)) => {
                    let id = outputs[0].envelope().session_id.clone().expect("session id");
                    forwarders.insert(id, tokio::spawn(forward(handle.events.subscribe(), out_tx.clone())));
                    for o in outputs {
                        match o {
                            Outgoing::Reply(e) => outbound.push(reply(e)),
                            Outgoing::Broadcast(e) => {
                                let _ = handle.events.send(text(&e).into());
                            }
                        }
                    }
                }
                Err(e) => outbound.push(reply(Envelope::new(e).with_seq(seq))),
            },
            ClientMessage::Subscribe(r) => match state.lookup(&r.session_id) {
                Some(handle) => {
                    forwarders
                        .entry(r.session_id.clone())
                        .or_insert_with(|| tokio::spawn(forward(handle.events.subscribe(), out_tx.clone())));
                    outbound.push(reply(Envelope::new(ServerMessage::Ack {}).with_seq(seq).with_session(&r.session_id)));
                }
                None => outbound.push(unknown(seq, &r.session_id)),
            },
            ClientMessage::IngestGaze(_) | ClientMessage::Inject(_) => {
                let id = env.body.session_id().expect("addressed").to_string();
                match state.lookup(&id) {
                    Some(handle) => {
                        let (tx, rx) = oneshot::channel();
                        let delivered = handle.tx.send(Request::Message(env, tx)).await.is_ok();
                        match (delivered, rx.await) {
                            (true, Ok(replies)) => outbound.extend(replies.into_iter().map(|t| Outbound::Text(t.into()))),
                            _ => outbound.push(unknown(seq, &id)),
                        }
                    }
                    None => outbound.push(unknown(seq, &id)),
                }
            }
        }
        let mut closed = false;
        for o in outbound {
            if out_tx.send(o).await.is_err() {
                closed = true;
                break;
            }
        }
        if closed {
            break;
        }
    }
    for (_, f) in forwarders {
        f.abort();
    }
    drop(out_tx);
    let _ = writer.await;
}

fn unknown(seq: Option<u64>, id: &str) -> Outbound {
    let e = Envelope::new(error_reply("unknown_session", format!("no session `{id}`"))).with_seq(seq);
    Outbound::Text(text(&e).into())
}
