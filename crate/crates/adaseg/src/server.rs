//! HTTP session service around [`SegmentationState`].

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use adaseg_core::image::channel_name;
use adaseg_core::{CuttingStrategy, EngineConfig, EngineError, Mode, MultiscalarStrategy, SegmentationState};
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::cli::{CuttingArg, ModeArg, MultiscalarArg};
use crate::export::{self, EventView};
use crate::image_io::decode_image;

#[derive(Clone, Debug)]
pub struct ServerConfig {
    /// Sessions idle for longer are dropped.
    pub session_ttl: Duration,
    /// Largest accepted upload body, in bytes.
    pub max_upload: usize,
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            session_ttl: Duration::from_secs(1800),
            max_upload: 32 * 1024 * 1024,
            ui_dir: None,
        }
    }
}

struct Session {
    state: RwLock<SegmentationState>,
    touched: Mutex<Instant>,
}

impl Session {
    fn touch(&self) {
        *self.touched.lock().expect("touch lock") = Instant::now();
    }

    fn idle(&self) -> Duration {
        self.touched.lock().expect("touch lock").elapsed()
    }
}

/// Shared server state: the session table and configuration.
#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Session>>>>,
    config: Arc<ServerConfig>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        AppState {
            sessions: Arc::default(),
            config: Arc::new(config),
        }
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session table").len()
    }

    /// Drops every session idle for longer than the configured TTL.
    pub fn evict_idle(&self) -> usize {
        let ttl = self.config.session_ttl;
        let mut sessions = self.sessions.write().expect("session table");
        let before = sessions.len();
        sessions.retain(|_, s| s.idle() <= ttl);
        before - sessions.len()
    }

    fn get(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        let session = self
            .sessions
            .read()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))?;
        if session.idle() > self.config.session_ttl {
            self.sessions.write().expect("session table").remove(id);
            return Err(ApiError::not_found(id));
        }
        session.touch();
        Ok(session)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl std::fmt::Display) -> Self {
        ApiError {
            status,
            message: message.to_string(),
        }
    }

    fn bad_request(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no session {id}"))
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

/// Builds the API router.
pub fn router(config: ServerConfig) -> Router {
    router_with_state(AppState::new(config))
}

pub fn router_with_state(state: AppState) -> Router {
    let limit = state.config.max_upload;
    let ui_dir = state.config.ui_dir.clone();
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_state).delete(delete_session))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/render", get(render))
        .route("/sessions/{id}/inspect", get(inspect))
        .route("/sessions/{id}/trace", get(trace))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves the API on `listener` and evicts idle sessions in the background.
pub async fn serve(listener: tokio::net::TcpListener, config: ServerConfig) -> std::io::Result<()> {
    let state = AppState::new(config);
    let sweeper = state.clone();
    let period = (state.config.session_ttl / 4).max(Duration::from_secs(1));
    tokio::spawn(async move {
        loop {
            tokio::time::sleep(period).await;
            let evicted = sweeper.evict_idle();
            if evicted > 0 {
                log::info!("evicted {evicted} idle session(s)");
            }
        }
    });
    axum::serve(listener, router_with_state(state)).await
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

fn parse_name<T: ValueEnum>(field: &str, value: &str) -> Result<T, ApiError> {
    T::from_str(value, false).map_err(|_| ApiError::bad_request(format!("invalid {field} '{value}'")))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Stats {
    pub iteration: usize,
    pub mode: String,
    pub cutting: String,
    pub multiscalar: Option<String>,
    pub n_sr: usize,
    pub n_vr: usize,
    pub j: f64,
    pub tau: f64,
    /// True when every channel partition groups pixels identically.
    pub channels_coincide: bool,
    /// True when the segmented image equals the data.
    pub converged: bool,
}

impl Stats {
    fn of(state: &SegmentationState) -> Self {
        let config = state.config();
        Stats {
            iteration: state.iteration(),
            mode: state.mode().name().into(),
            cutting: config.cutting.name().into(),
            multiscalar: (config.mode == Mode::Multiscalar).then(|| config.multiscalar.name().into()),
            n_sr: state.n_sr(),
            n_vr: state.n_vr(),
            j: state.j(),
            tau: state.tau(),
            channels_coincide: state.channels_coincide(),
            converged: state.is_exact(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub channel_count: usize,
    pub stats: Stats,
}

fn session_view(id: &str, state: &SegmentationState) -> SessionView {
    let img = state.image();
    SessionView {
        id: id.into(),
        width: img.width(),
        height: img.height(),
        channel_count: img.channel_count(),
        stats: Stats::of(state),
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct CreateParams {
    pub mode: Option<String>,
    pub cutting: Option<String>,
    pub multiscalar: Option<String>,
    pub checkpoint_interval: Option<usize>,
}

fn engine_config(params: &CreateParams) -> Result<EngineConfig, ApiError> {
    let mode: Mode = match &params.mode {
        Some(m) => parse_name::<ModeArg>("mode", m)?.into(),
        None => Mode::Vector,
    };
    let cutting: CuttingStrategy = match &params.cutting {
        Some(c) => parse_name::<CuttingArg>("cutting", c)?.into(),
        None => CuttingStrategy::OverallBest,
    };
    let multiscalar: MultiscalarStrategy = match &params.multiscalar {
        Some(m) => parse_name::<MultiscalarArg>("multiscalar", m)?.into(),
        None => MultiscalarStrategy::BestComponentOnly,
    };
    let mut config = EngineConfig {
        mode,
        cutting,
        multiscalar,
        ..EngineConfig::default()
    };
    if let Some(k) = params.checkpoint_interval {
        if k == 0 {
            return Err(ApiError::bad_request("checkpoint_interval must be positive"));
        }
        config.snapshot_interval = k;
    }
    Ok(config)
}

async fn create_session(
    State(app): State<AppState>,
    Query(params): Query<CreateParams>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let config = engine_config(&params)?;
    let state = blocking(move || {
        let img = decode_image(&body).map_err(ApiError::bad_request)?;
        SegmentationState::init(Arc::new(img), config).map_err(ApiError::bad_request)
    })
    .await?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let view = session_view(&id, &state);
    let session = Arc::new(Session {
        state: RwLock::new(state),
        touched: Mutex::new(Instant::now()),
    });
    app.sessions.write().expect("session table").insert(id.clone(), session);
    log::debug!("created session {id}");
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_state(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let session = app.get(&id)?;
    let state = session.state.read().expect("session lock");
    Ok(Json(session_view(&id, &state)))
}

async fn delete_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match app.sessions.write().expect("session table").remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::not_found(&id)),
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct StepRequest {
    pub count: Option<usize>,
    pub cutting: Option<String>,
    pub multiscalar: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StepResponse {
    pub requested: usize,
    pub completed: usize,
    pub events: Vec<EventView>,
    /// Stepping stopped because the segmented image equals the data.
    pub converged: bool,
    /// Stepping stopped because no region can be split but J is positive.
    pub stalled: bool,
    pub stats: Stats,
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn step(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<StepResponse>), ApiError> {
    let request: StepRequest = parse_body(&body)?;
    let count = request.count.unwrap_or(1);
    if count == 0 {
        return Err(ApiError::bad_request("count must be at least 1"));
    }
    let cutting: Option<CuttingStrategy> = match &request.cutting {
        Some(c) => Some(parse_name::<CuttingArg>("cutting", c)?.into()),
        None => None,
    };
    let multiscalar: Option<MultiscalarStrategy> = match &request.multiscalar {
        Some(m) => Some(parse_name::<MultiscalarArg>("multiscalar", m)?.into()),
        None => None,
    };
    let session = app.get(&id)?;
    blocking(move || {
        let mut state = session.state.write().expect("session lock");
        if let Some(ms) = multiscalar {
            match state.set_multiscalar_strategy(ms) {
                Ok(()) => {}
                Err(EngineError::PartitionsDiverged) => {
                    return Err(ApiError::new(
                        StatusCode::CONFLICT,
                        "channel partitions have diverged; combine-best-components needs coinciding partitions",
                    ))
                }
                Err(e) => return Err(ApiError::bad_request(e)),
            }
        }
        if let Some(c) = cutting {
            state.set_cutting_strategy(c);
        }
        let channels = state.image().channel_count();
        let (mut events, mut completed, mut converged, mut stalled) = (Vec::new(), 0, false, false);
        while completed < count {
            match state.step() {
                Ok(step) => {
                    events.extend(step.iter().map(|e| EventView::of(e, channels)));
                    completed += 1;
                }
                Err(EngineError::Converged) => {
                    converged = true;
                    break;
                }
                Err(EngineError::Stalled { .. }) => {
                    stalled = true;
                    break;
                }
                Err(EngineError::PartitionsDiverged) => {
                    return Err(ApiError::new(StatusCode::CONFLICT, EngineError::PartitionsDiverged))
                }
                Err(e) => return Err(ApiError::internal(e)),
            }
        }
        let status = if completed == count {
            StatusCode::OK
        } else {
            StatusCode::CONFLICT
        };
        let response = StepResponse {
            requested: count,
            completed,
            events,
            converged,
            stalled,
            stats: Stats::of(&state),
        };
        Ok((status, Json(response)))
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
pub struct UndoRequest {
    pub count: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UndoResponse {
    pub requested: usize,
    pub undone: usize,
    pub stats: Stats,
}

async fn undo(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<UndoResponse>), ApiError> {
    let request: UndoRequest = parse_body(&body)?;
    let count = request.count.unwrap_or(1);
    if count == 0 {
        return Err(ApiError::bad_request("count must be at least 1"));
    }
    let session = app.get(&id)?;
    blocking(move || {
        let mut state = session.state.write().expect("session lock");
        let mut undone = 0;
        while undone < count && state.undo().is_ok() {
            undone += 1;
        }
        let status = if undone == count {
            StatusCode::OK
        } else {
            StatusCode::CONFLICT
        };
        Ok((
            status,
            Json(UndoResponse {
                requested: count,
                undone,
                stats: Stats::of(&state),
            }),
        ))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct RenderParams {
    pub layer: Option<String>,
}

async fn render(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<RenderParams>,
) -> Result<Response, ApiError> {
    let layer = params.layer.unwrap_or_else(|| "segmented".into());
    if !matches!(layer.as_str(), "segmented" | "edges" | "original" | "labels") {
        return Err(ApiError::bad_request(format!("invalid layer '{layer}'")));
    }
    let session = app.get(&id)?;
    let png = blocking(move || {
        let state = session.state.read().expect("session lock");
        match layer.as_str() {
            "segmented" => export::render_segmented(&state),
            "edges" => export::render_edges(&state),
            "labels" => export::render_labels(&state),
            _ => export::render_original(state.image()),
        }
        .map_err(ApiError::internal)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Debug, Deserialize)]
pub struct InspectParams {
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct RegionInfo {
    pub layer: usize,
    pub channels: String,
    pub region: u32,
    pub pixel_count: usize,
    /// Mean value of every image channel over the region.
    pub mean: Vec<f64>,
    /// Decrease of J the region's best cutting would bring; zero if unsplittable.
    pub best_delta_j: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InspectResponse {
    pub x: usize,
    pub y: usize,
    pub regions: Vec<RegionInfo>,
}

async fn inspect(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<InspectParams>,
) -> Result<Json<InspectResponse>, ApiError> {
    let session = app.get(&id)?;
    let state = session.state.read().expect("session lock");
    let img = state.image();
    if params.x >= img.width() || params.y >= img.height() {
        return Err(ApiError::bad_request(format!(
            "pixel ({}, {}) is outside the {}x{} image",
            params.x,
            params.y,
            img.width(),
            img.height()
        )));
    }
    let pixel = params.y * img.width() + params.x;
    let mut regions = Vec::new();
    for layer in 0..state.layer_count() {
        let partition = state.partition(layer);
        let id = partition.label(pixel);
        let region = partition.region(id).map_err(ApiError::internal)?;
        let stats = region.stats();
        regions.push(RegionInfo {
            layer,
            channels: state
                .layer_channels(layer)
                .iter()
                .map(|k| channel_name(k, img.channel_count()))
                .collect(),
            region: id.0,
            pixel_count: region.len(),
            mean: (0..img.channel_count()).map(|k| stats.mean(k)).collect(),
            best_delta_j: state.cached_candidate(layer, id).map_or(0.0, |c| c.delta_j),
        });
    }
    Ok(Json(InspectResponse {
        x: params.x,
        y: params.y,
        regions,
    }))
}

#[derive(Debug, Deserialize)]
pub struct TraceParams {
    pub format: Option<String>,
}

async fn trace(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<TraceParams>,
) -> Result<Response, ApiError> {
    let session = app.get(&id)?;
    let state = session.state.read().expect("session lock");
    match params.format.as_deref().unwrap_or("csv") {
        "csv" => Ok(([(header::CONTENT_TYPE, "text/csv")], export::trace_csv(&state)).into_response()),
        "json" => Ok(Json(export::trace_json(&state)).into_response()),
        other => Err(ApiError::bad_request(format!("invalid format '{other}'"))),
    }
}
