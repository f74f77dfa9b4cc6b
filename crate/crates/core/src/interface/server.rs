//! HTTP/JSON service with server-sent round events.
//!
//! | Method | Path | |
//! |---|---|---|
//! | GET | `/api/health` | liveness |
//! | GET | `/api/simulations` | all runs |
//! | POST | `/api/simulations` | submit a config (201, 422, 429) |
//! | GET | `/api/simulations/{id}` | run handle |
//! | GET | `/api/simulations/{id}/events?from=r` | SSE: `round` events after round `r`, then one `status` event |
//! | POST | `/api/simulations/{id}/cancel` | cancel (409 once terminal) |
//! | GET | `/api/simulations/{id}/export` | zip bundle (409 unless COMPLETED or CANCELLED) |
//! | POST | `/api/datasets` | multipart CSV upload (413 above the size limit) |
//!
//! Everything else is served from the static assets directory, or a
//! placeholder page when none is configured.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;

use super::registry::{Registry, RegistryConfig, RegistryError, RunEvent};
use crate::data::{load_csv_bytes, LabelColumn, MAX_CSV_BYTES};
use crate::error::{Error, FieldError, Result};
use crate::federate::{json_field_error, upload_paths, DataSources, SimulationConfig, UploadMeta};

pub const DEFAULT_BIND: &str = "127.0.0.1:5000";

/// Oversized uploads are read and discarded up to this many bytes so the
/// client receives a 413; beyond it the connection is dropped.
const UPLOAD_DRAIN_LIMIT: usize = 4 * MAX_CSV_BYTES;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    pub runs_dir: PathBuf,
    pub data_dir: PathBuf,
    /// Static dashboard build; `None` serves a placeholder at `/`.
    pub assets_dir: Option<PathBuf>,
    pub max_concurrent_runs: usize,
    pub max_pending_runs: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: DEFAULT_BIND.parse().expect("valid default address"),
            runs_dir: PathBuf::from("runs"),
            data_dir: crate::data::default_data_dir(),
            assets_dir: None,
            max_concurrent_runs: 2,
            max_pending_runs: 16,
        }
    }
}

impl ServerConfig {
    fn registry_config(&self) -> RegistryConfig {
        let sources = DataSources {
            data_dir: self.data_dir.clone(),
            upload_dir: Some(self.runs_dir.join("uploads")),
        };
        let mut rc = RegistryConfig::new(&self.runs_dir, sources);
        rc.max_concurrent_runs = self.max_concurrent_runs;
        rc.max_pending_runs = self.max_pending_runs;
        rc
    }
}

#[derive(Clone)]
struct AppState {
    registry: Arc<Registry>,
    upload_dir: PathBuf,
}

/// JSON error body: `{"error": "...", "errors": [{"field", "message"}]}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    errors: Vec<FieldError>,
    location: Option<(usize, Option<usize>)>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            errors: Vec::new(),
            location: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if !self.errors.is_empty() {
            body["errors"] = json!(self.errors);
        }
        if let Some((line, column)) = self.location {
            body["line"] = json!(line);
            body["column"] = json!(column);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation(errors) => Self {
                errors,
                ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid configuration")
            },
            Error::Parse { line, column, .. } => Self {
                location: Some((line, column)),
                ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
            },
            Error::Config(_) | Error::Dimension { .. } => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
            }
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, e.to_string()),
            RegistryError::Conflict(_) => Self::new(StatusCode::CONFLICT, e.to_string()),
            RegistryError::QueueFull => Self::new(StatusCode::TOO_MANY_REQUESTS, e.to_string()),
            RegistryError::Invalid(inner) => inner.into(),
        }
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

/// Builds the application router over an opened registry.
pub fn router(config: &ServerConfig) -> Result<Router> {
    let rc = config.registry_config();
    let upload_dir = rc.sources.upload_dir.clone().expect("service has an upload dir");
    std::fs::create_dir_all(&upload_dir).map_err(|e| Error::io(&upload_dir, e))?;
    let state = AppState {
        registry: Registry::open(rc)?,
        upload_dir,
    };
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/simulations", get(list_runs).post(create_run))
        .route("/api/simulations/{id}", get(get_run))
        .route("/api/simulations/{id}/events", get(run_events))
        .route("/api/simulations/{id}/cancel", post(cancel_run))
        .route("/api/simulations/{id}/export", get(export_run))
        .route(
            "/api/datasets",
            post(upload_dataset).layer(DefaultBodyLimit::max(UPLOAD_DRAIN_LIMIT)),
        )
        .with_state(state);
    Ok(match &config.assets_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    })
}

/// Binds the listener. An address already in use is a startup error.
pub async fn bind(config: &ServerConfig) -> Result<(TcpListener, Router)> {
    let app = router(config)?;
    let listener = TcpListener::bind(config.bind)
        .await
        .map_err(|e| Error::io(config.bind.to_string(), e))?;
    Ok((listener, app))
}

/// Serves until ctrl-c.
pub async fn serve(config: ServerConfig) -> Result<()> {
    let (listener, app) = bind(&config).await?;
    let addr = listener.local_addr().map_err(|e| Error::io(config.bind.to_string(), e))?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(addr.to_string(), e))
}

async fn placeholder() -> Html<&'static str> {
    Html(
        "<!doctype html><html><head><title>qflsim</title></head><body>\
         <h1>qflsim</h1><p>The simulation service is running. The API lives under \
         <code>/api</code>; start the server with <code>--assets DIR</code> to serve a dashboard.</p>\
         </body></html>",
    )
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn list_runs(State(st): State<AppState>) -> impl IntoResponse {
    Json(st.registry.list())
}

async fn create_run(State(st): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let config: SimulationConfig = serde_json::from_slice(&body).map_err(|e| ApiError {
        errors: vec![json_field_error(&e)],
        ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid configuration")
    })?;
    let registry = st.registry.clone();
    let handle = tokio::task::spawn_blocking(move || {
        let rt = tokio::runtime::Handle::current();
        let _guard = rt.enter();
        registry.submit(config)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let location = format!("/api/simulations/{}", handle.id);
    Ok((StatusCode::CREATED, [(header::LOCATION, location)], Json(handle)).into_response())
}

async fn get_run(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(st.registry.get(&id)?))
}

async fn cancel_run(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok((StatusCode::ACCEPTED, Json(st.registry.cancel(&id)?)))
}

async fn export_run(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = st.registry.entry(&id)?;
    let bytes = tokio::task::spawn_blocking(move || entry.export())
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((
        [
            (header::CONTENT_TYPE, "application/zip".to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"qflsim-{id}.zip\""),
            ),
        ],
        bytes,
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    from: Option<usize>,
}

#[derive(Debug, Serialize)]
struct StatusEvent<'a> {
    id: &'a str,
    status: super::registry::RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<&'a str>,
    rounds_completed: usize,
}

async fn run_events(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = std::result::Result<Event, Infallible>>>> {
    let entry = st.registry.entry(&id)?;
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse().ok());
    let from = q.from.or(resume).unwrap_or(0);
    let rx = entry.subscribe();
    let stream = futures::stream::unfold(Some((entry, rx, from)), |state| async move {
        let (entry, mut rx, cursor) = state?;
        loop {
            rx.borrow_and_update();
            match entry.next_event(cursor) {
                Some(RunEvent::Round(m)) => {
                    let ev = Event::default()
                        .event("round")
                        .id(m.round.to_string())
                        .json_data(&m)
                        .unwrap_or_else(|_| Event::default().event("round"));
                    return Some((Ok(ev), Some((entry, rx, m.round))));
                }
                Some(RunEvent::Status(h)) => {
                    let body = StatusEvent {
                        id: &h.id,
                        status: h.status,
                        message: h.message.as_deref(),
                        rounds_completed: h.rounds_completed,
                    };
                    let ev = Event::default()
                        .event("status")
                        .json_data(&body)
                        .unwrap_or_else(|_| Event::default().event("status"));
                    return Some((Ok(ev), None));
                }
                None => {
                    if rx.changed().await.is_err() {
                        return None;
                    }
                }
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}

#[derive(Debug, Serialize)]
struct UploadResponse {
    id: String,
    name: String,
    rows: usize,
    feature_dim: usize,
    num_classes: usize,
    label_column: LabelColumn,
    label_names: Vec<String>,
}

fn multipart_error(e: axum::extract::multipart::MultipartError) -> ApiError {
    let status = e.status();
    if status == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::new(status, format!("upload exceeds {MAX_CSV_BYTES} bytes"))
    } else {
        ApiError::new(StatusCode::BAD_REQUEST, e.body_text())
    }
}

/// Header row with a `label` column, else the last column.
fn default_label_column(bytes: &[u8]) -> LabelColumn {
    let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let first = String::from_utf8_lossy(first);
    let cells: Vec<&str> = first.trim_end_matches('\r').split(',').map(str::trim).collect();
    if cells.contains(&"label") {
        LabelColumn::Name("label".into())
    } else {
        LabelColumn::Index(cells.len().saturating_sub(1))
    }
}

async fn upload_dataset(State(st): State<AppState>, mut form: Multipart) -> ApiResult<impl IntoResponse> {
    let mut file: Option<(String, Bytes)> = None;
    let mut label: Option<LabelColumn> = None;
    let mut too_large = false;
    while let Some(mut field) = form.next_field().await.map_err(multipart_error)? {
        match field.name() {
            Some("file") => {
                let name = field.file_name().unwrap_or("upload.csv").to_string();
                let mut buf = Vec::new();
                let mut oversize = false;
                while let Some(chunk) = field.chunk().await.map_err(multipart_error)? {
                    oversize |= buf.len() + chunk.len() > MAX_CSV_BYTES;
                    if oversize {
                        buf = Vec::new();
                    } else {
                        buf.extend_from_slice(&chunk);
                    }
                }
                too_large |= oversize;
                file = Some((name, Bytes::from(buf)));
            }
            Some("label_column") => {
                let text = field.text().await.map_err(multipart_error)?;
                let text = text.trim();
                if !text.is_empty() {
                    label = Some(match text.parse::<usize>() {
                        Ok(i) => LabelColumn::Index(i),
                        Err(_) => LabelColumn::Name(text.to_string()),
                    });
                }
            }
            _ => {}
        }
    }
    if too_large {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("upload exceeds {MAX_CSV_BYTES} bytes"),
        ));
    }
    let (file_name, bytes) =
        file.ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "missing multipart field \"file\""))?;
    let label = label.unwrap_or_else(|| default_label_column(&bytes));
    let upload_dir = st.upload_dir.clone();
    let response = tokio::task::spawn_blocking(move || -> Result<UploadResponse> {
        let dataset = load_csv_bytes(&bytes, &label, file_name.clone())?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let (csv_path, meta_path) = upload_paths(&upload_dir, &id);
        std::fs::write(&csv_path, &bytes).map_err(|e| Error::io(&csv_path, e))?;
        let meta = UploadMeta {
            label_column: label.clone(),
            file_name: file_name.clone(),
        };
        std::fs::write(&meta_path, serde_json::to_vec(&meta)?).map_err(|e| Error::io(&meta_path, e))?;
        Ok(UploadResponse {
            id,
            name: file_name,
            rows: dataset.len(),
            feature_dim: dataset.feature_dim,
            num_classes: dataset.num_classes,
            label_column: label,
            label_names: dataset.label_names,
        })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((StatusCode::CREATED, Json(response)))
}
