//! The session server: a WebSocket endpoint carrying the JSON protocol and a
//! request/response HTTP fallback. Every WebSocket connection, and every
//! session created over HTTP, gets its own isolated session host running on
//! a dedicated thread.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc as std_mpsc;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use roomcraft::config::Config;
use roomcraft::session::protocol::Envelope;
use roomcraft::session::SessionHost;
use serde_json::{json, Value};
use tokio::sync::{mpsc, oneshot};

const POLL_INTERVAL: Duration = Duration::from_millis(10);

struct Call {
    text: String,
    reply: oneshot::Sender<Vec<Envelope>>,
}

/// Channel to one session host thread. Dropping it stops the thread.
pub struct HostHandle {
    calls: std_mpsc::Sender<Call>,
}

impl HostHandle {
    /// Starts a host; unsolicited messages (published panes, model status)
    /// arrive on the returned receiver.
    pub fn spawn(config: Config) -> (HostHandle, mpsc::UnboundedReceiver<Envelope>) {
        let (calls, rx) = std_mpsc::channel::<Call>();
        let (events_tx, events_rx) = mpsc::unbounded_channel();
        std::thread::Builder::new()
            .name("session-host".into())
            .spawn(move || {
                let mut host = SessionHost::new(config);
                loop {
                    match rx.recv_timeout(POLL_INTERVAL) {
                        Ok(call) => {
                            let _ = call.reply.send(host.handle_text(&call.text));
                        }
                        Err(std_mpsc::RecvTimeoutError::Timeout) => {}
                        Err(std_mpsc::RecvTimeoutError::Disconnected) => break,
                    }
                    for envelope in host.poll() {
                        if events_tx.send(envelope).is_err() {
                            return;
                        }
                    }
                }
            })
            .expect("spawn session host");
        (HostHandle { calls }, events_rx)
    }

    pub async fn call(&self, text: String) -> Vec<Envelope> {
        let (reply, rx) = oneshot::channel();
        if self.calls.send(Call { text, reply }).is_err() {
            return Vec::new();
        }
        rx.await.unwrap_or_default()
    }
}

struct HttpSession {
    host: HostHandle,
    events: mpsc::UnboundedReceiver<Envelope>,
}

#[derive(Clone)]
pub struct AppState {
    config: Config,
    http: Arc<Mutex<HashMap<u64, Arc<tokio::sync::Mutex<HttpSession>>>>>,
    next_handle: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(config: Config) -> AppState {
        AppState {
            config,
            http: Arc::default(),
            next_handle: Arc::new(AtomicU64::new(1)),
        }
    }
}

pub fn router(config: Config) -> Router {
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/api/health", get(|| async { "ok" }))
        .route("/api/sessions", post(http_open))
        .route("/api/sessions/{handle}", axum::routing::delete(http_close))
        .route("/api/sessions/{handle}/messages", post(http_message))
        .route("/api/sessions/{handle}/save", post(http_save))
        .route("/api/sessions/{handle}/load", post(http_load))
        .with_state(AppState::new(config))
}

/// Binds `addr` and serves until the future is dropped or the process exits.
pub async fn serve(config: Config, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(config)).await?;
    Ok(())
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state.config))
}

fn text(envelope: &Envelope) -> Message {
    Message::Text(serde_json::to_string(envelope).expect("envelope serializes").into())
}

async fn client(mut socket: WebSocket, config: Config) {
    let (host, mut events) = HostHandle::spawn(config);
    loop {
        tokio::select! {
            inbound = socket.recv() => match inbound {
                Some(Ok(Message::Text(t))) => {
                    for reply in host.call(t.to_string()).await {
                        if socket.send(text(&reply)).await.is_err() {
                            return;
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return,
                Some(Ok(_)) => {}
            },
            Some(event) = events.recv() => {
                if socket.send(text(&event)).await.is_err() {
                    return;
                }
            }
        }
    }
}

fn not_found(handle: u64) -> Response {
    (
        StatusCode::NOT_FOUND,
        Json(json!({ "error": format!("no session handle {handle}") })),
    )
        .into_response()
}

fn lookup(state: &AppState, handle: u64) -> Option<Arc<tokio::sync::Mutex<HttpSession>>> {
    state.http.lock().unwrap().get(&handle).cloned()
}

async fn http_open(State(state): State<AppState>) -> Json<Value> {
    let (host, events) = HostHandle::spawn(state.config.clone());
    let handle = state.next_handle.fetch_add(1, Ordering::Relaxed);
    state
        .http
        .lock()
        .unwrap()
        .insert(handle, Arc::new(tokio::sync::Mutex::new(HttpSession { host, events })));
    Json(json!({ "handle": handle }))
}

async fn http_close(State(state): State<AppState>, Path(handle): Path<u64>) -> Response {
    match state.http.lock().unwrap().remove(&handle) {
        Some(_) => StatusCode::NO_CONTENT.into_response(),
        None => not_found(handle),
    }
}

/// Sends one envelope and returns the replies followed by any unsolicited
/// messages queued since the previous request.
async fn exchange(state: &AppState, handle: u64, envelope: Value) -> Response {
    let Some(session) = lookup(state, handle) else {
        return not_found(handle);
    };
    let mut session = session.lock().await;
    let mut out = session.host.call(envelope.to_string()).await;
    while let Ok(event) = session.events.try_recv() {
        out.push(event);
    }
    Json(out).into_response()
}

async fn http_message(State(state): State<AppState>, Path(handle): Path<u64>, Json(body): Json<Value>) -> Response {
    exchange(&state, handle, body).await
}

async fn http_save(State(state): State<AppState>, Path(handle): Path<u64>, body: Option<Json<Value>>) -> Response {
    let payload = body.map_or(Value::Null, |Json(v)| v);
    exchange(&state, handle, json!({ "kind": "session/save", "payload": payload })).await
}

async fn http_load(State(state): State<AppState>, Path(handle): Path<u64>, Json(body): Json<Value>) -> Response {
    exchange(&state, handle, json!({ "kind": "session/load", "payload": body })).await
}
