//! HTTP front end for the orchestrator.
//!
//! | route | |
//! |---|---|
//! | `POST /sessions` | optional JSON `{"engine": "builtin" \| "external"}` |
//! | `POST /sessions/{id}/turns` | multipart: `description` or `description_audio`, plus `file` parts |
//! | `GET /sessions/{id}` | header and turns |
//! | `GET /resources/{id}` | stored bytes |
//! | `GET /health` | liveness |
//!
//! Dialogue failures come back as 200 with `error` set on the turn. Only
//! transport problems use HTTP error statuses.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use audiochat_core::service::{DescriptionInput, ServiceError, Upload};
use audiochat_core::{Orchestrator, TurnRequest};
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

const MAX_BODY: usize = 64 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    orch: Arc<Orchestrator>,
    /// Per-session queues; tokio's mutex hands out the lock in FIFO order.
    queues: Arc<Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>>,
}

impl AppState {
    pub fn new(orch: Arc<Orchestrator>) -> Self {
        AppState {
            orch,
            queues: Arc::default(),
        }
    }

    fn queue(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.queues
            .lock()
            .expect("queue table poisoned")
            .entry(id.to_string())
            .or_default()
            .clone()
    }
}

#[derive(Debug)]
pub struct ApiError(StatusCode, serde_json::Value);

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::BAD_REQUEST, json!({ "error": msg.into() }))
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::UnknownSession(_) | ServiceError::UnknownResource(_) => StatusCode::NOT_FOUND,
            ServiceError::UnknownEngine(_) => StatusCode::BAD_REQUEST,
            ServiceError::Report(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Io { .. } | ServiceError::Encode(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = match &e {
            ServiceError::Report(r) => json!({ "error": r.message, "report": r }),
            other => json!({ "error": other.to_string() }),
        };
        ApiError(status, body)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })))?
        .map_err(ApiError::from)
}

#[derive(Debug, Default, Deserialize)]
struct CreateSession {
    engine: Option<String>,
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("bad session request: {e}")))?
    };
    let orch = st.orch.clone();
    let meta = blocking(move || orch.create_session(req.engine.as_deref())).await?;
    Ok((StatusCode::CREATED, Json(meta)).into_response())
}

async fn read_turn_request(mut mp: Multipart) -> Result<TurnRequest, ApiError> {
    let mut description = None;
    let mut uploads = Vec::new();
    while let Some(field) = mp.next_field().await.map_err(|e| ApiError::bad_request(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let file_name = field.file_name().map(str::to_string);
        let data = field.bytes().await.map_err(|e| ApiError::bad_request(e.to_string()))?;
        match name.as_str() {
            "description" => {
                let text = String::from_utf8(data.to_vec())
                    .map_err(|_| ApiError::bad_request("description is not UTF-8"))?;
                description = Some(DescriptionInput::Text(text));
            }
            "description_audio" => description = Some(DescriptionInput::Audio(data.to_vec())),
            "file" => uploads.push(Upload {
                name: file_name.unwrap_or_else(|| format!("upload{}", uploads.len() + 1)),
                bytes: data.to_vec(),
            }),
            other => log::debug!("ignoring multipart field {other:?}"),
        }
    }
    let description =
        description.ok_or_else(|| ApiError::bad_request("a description or description_audio field is required"))?;
    Ok(TurnRequest { description, uploads })
}

async fn post_turn(State(st): State<AppState>, Path(id): Path<String>, mp: Multipart) -> Result<Response, ApiError> {
    let req = read_turn_request(mp).await?;
    let queue = st.queue(&id);
    let _guard = queue.lock().await;
    let orch = st.orch.clone();
    let turn = blocking(move || orch.post_turn(&id, req)).await?;
    Ok(Json(turn).into_response())
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let orch = st.orch.clone();
    let view = blocking(move || orch.get_session(&id)).await?;
    Ok(Json(view).into_response())
}

async fn get_resource(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let orch = st.orch.clone();
    let (bytes, ct) = blocking(move || orch.get_resource(&id)).await?;
    Ok(([(header::CONTENT_TYPE, ct)], bytes).into_response())
}

async fn health(State(st): State<AppState>) -> Json<serde_json::Value> {
    let reg = st.orch.registry();
    Json(json!({
        "status": "ok",
        "tools": reg.tools().len(),
        "enabled": reg.enabled().count(),
    }))
}

/// The API routes, plus static files from `ui_dir` at `/` when given.
pub fn router(orch: Arc<Orchestrator>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/resources/{id}", get(get_resource))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(AppState::new(orch));
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(orch: Arc<Orchestrator>, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(orch, ui_dir)).await
}
