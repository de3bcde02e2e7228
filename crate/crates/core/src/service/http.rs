//! HTTP and WebSocket endpoints.
//!
//! The dispatcher API (`/calls`, `/config`, `/simulate`, `/live`) and the
//! carrier-facing media endpoints (`/media`, `/twiml`) are separate routers so
//! they can listen on different ports.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::broadcast::error::RecvError;

use super::config::{ConfigError, RuntimeConfig, ServiceConfig};
use super::runtime::{build_state, spawn_session, spawn_simulation, AppState};
use super::simulate::{apply_channel_overrides, load_named_scenario, SimulateError};
use crate::media_gateway::{parse_media_event, ReplayError, ScenarioFile, SessionInput};
use crate::prioritizer::QueueError;

type Shared = Arc<AppState>;

/// JSON error body `{"error": "..."}` with a status code.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown session {id}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.message}))).into_response()
    }
}

impl From<SimulateError> for ApiError {
    fn from(e: SimulateError) -> Self {
        let status = match &e {
            SimulateError::UnknownScenario(_) | SimulateError::Replay(ReplayError::ScenarioNotFound(_)) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.to_string())
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

pub fn api_router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/calls", get(list_calls))
        .route("/calls/{id}", get(call_detail))
        .route("/calls/{id}/claim", post(claim))
        .route("/calls/{id}/resolve", post(resolve))
        .route("/config", get(get_config).put(put_config))
        .route("/simulate", post(simulate))
        .route("/live", get(live))
        .with_state(state)
}

pub fn media_router(state: Shared) -> Router {
    Router::new().route("/media", get(media)).route("/twiml", post(twiml)).with_state(state)
}

async fn list_calls(State(state): State<Shared>) -> impl IntoResponse {
    Json(state.desk.snapshot().queue.clone())
}

async fn call_detail(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = state.desk.snapshot();
    let rec = snap.calls.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    Ok(Json(rec).into_response())
}

fn queue_error(state: &AppState, id: &str, e: QueueError) -> ApiError {
    match e {
        // Known call that has not produced a final yet: nothing to act on.
        QueueError::NotFound(_) if state.desk.snapshot().calls.contains_key(id) => {
            ApiError::new(StatusCode::CONFLICT, format!("session {id} is not queued yet"))
        }
        QueueError::NotFound(_) => ApiError::not_found(id),
        e @ QueueError::IllegalTransition { .. } => ApiError::new(StatusCode::CONFLICT, e.to_string()),
        e => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn claim(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    match state.desk.claim(&id).await {
        Ok(entry) => Ok(Json(entry).into_response()),
        Err(e) => Err(queue_error(&state, &id, e)),
    }
}

async fn resolve(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    match state.desk.resolve(&id).await {
        Ok(entry) => Ok(Json(entry).into_response()),
        Err(e) => Err(queue_error(&state, &id, e)),
    }
}

async fn get_config(State(state): State<Shared>) -> impl IntoResponse {
    Json(state.desk.snapshot().config.clone())
}

/// Replaces the whole runtime config; omitted fields take their defaults.
async fn put_config(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let cfg: RuntimeConfig = parse_json(&body)?;
    match state.desk.set_config(cfg).await {
        Ok(applied) => Ok(Json(applied).into_response()),
        Err(e @ ConfigError::Invalid(_)) => Err(ApiError::bad_request(e.to_string())),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScenarioRef {
    Named(String),
    Inline(ScenarioFile),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    scenario: ScenarioRef,
    #[serde(default)]
    channel: Option<Value>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    realtime: bool,
}

async fn simulate(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: SimulateRequest = parse_json(&body)?;
    let scenario = match req.scenario {
        ScenarioRef::Named(name) => load_named_scenario(&state.config.paths.scenarios, &name)?,
        ScenarioRef::Inline(s) => s,
    };
    let mut channel = match &req.channel {
        Some(over) => apply_channel_overrides(&state.config.channel, over)?,
        None => state.config.channel.clone(),
    };
    if let Some(seed) = req.seed {
        channel.seed = seed;
    }
    let ticket = spawn_simulation(&state, scenario, &channel, req.realtime)?;
    Ok((StatusCode::ACCEPTED, Json(ticket)).into_response())
}

async fn live(State(state): State<Shared>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| push_events(state, socket))
}

async fn push_events(state: Shared, mut socket: WebSocket) {
    let mut rx = state.events.subscribe();
    loop {
        tokio::select! {
            event = rx.recv() => match event {
                Ok(event) => {
                    let text = serde_json::to_string(&event).expect("events serialize");
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                // Slow consumer: it sees the seq gap and refetches.
                Err(RecvError::Lagged(n)) => tracing::warn!(missed = n, "live client lagging"),
                Err(RecvError::Closed) => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn media(State(state): State<Shared>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| relay_media(state, socket))
}

async fn relay_media(state: Shared, mut socket: WebSocket) {
    let feed = spawn_session(&state, state.media_factory());
    tracing::info!(session = %feed.session_id, "media stream connected");
    while let Some(Ok(msg)) = socket.recv().await {
        match msg {
            Message::Text(text) => match parse_media_event(text.as_str()) {
                Ok(event) => {
                    if !feed.send(SessionInput::Event(event)) {
                        break;
                    }
                }
                Err(e) => tracing::warn!(session = %feed.session_id, error = %e, "bad media message"),
            },
            Message::Close(_) => break,
            _ => {}
        }
    }
    feed.send(SessionInput::SocketClosed);
}

fn xml_attr(s: &str) -> String {
    s.replace('&', "&amp;").replace('"', "&quot;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Call-answer instructions telling the carrier to stream audio to `/media`.
pub fn twiml_body(media_url: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<Response><Connect><Stream url=\"{}\"/></Connect></Response>\n",
        xml_attr(media_url)
    )
}

async fn twiml(State(state): State<Shared>) -> Response {
    ([(header::CONTENT_TYPE, "text/xml")], twiml_body(&state.config.listen.public_media_url)).into_response()
}

/// Serve on already-bound listeners. Without a media listener both routers
/// share the API one.
pub async fn serve_on(state: Shared, api: TcpListener, media: Option<TcpListener>) -> std::io::Result<()> {
    match media {
        None => axum::serve(api, api_router(state.clone()).merge(media_router(state))).await,
        Some(media) => {
            let a = axum::serve(api, api_router(state.clone()));
            let m = axum::serve(media, media_router(state));
            tokio::try_join!(async { a.await }, async { m.await }).map(|_| ())
        }
    }
}

/// Bind the configured addresses and serve until the process ends.
pub async fn run(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let api_addr = config.listen.api.clone();
    let media_addr = config.listen.media.clone();
    let state = build_state(config)?;
    let api = TcpListener::bind(&api_addr).await?;
    let media = if media_addr == api_addr { None } else { Some(TcpListener::bind(&media_addr).await?) };
    tracing::info!(api = %api.local_addr()?, media = ?media.as_ref().map(|m| m.local_addr()), "listening");
    serve_on(state, api, media).await?;
    Ok(())
}
