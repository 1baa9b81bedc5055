//! HTTP+JSON service backing the board UI.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use betaflow::skeleton::{BodyRegressor, DEFAULT_FPS};
use betaflow::{HoldsSequence, MoveSequence, Point};

use crate::cli::ServeArgs;
use crate::commands::{animate_sequence, load_regressor};
use crate::inference::{LoadedModel, ModelKind};
use crate::store::{ArtifactKind, ProjectStore};

/// Upper bound on frames per move accepted by `/animate`.
pub const MAX_FRAMES_PER_MOVE: usize = 600;

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub name: String,
    pub source: String,
    pub parameters: usize,
    pub config: serde_json::Value,
}

/// Checkpoints loaded once at startup, one per model kind.
#[derive(Default)]
pub struct ModelRegistry {
    models: BTreeMap<&'static str, (LoadedModel, String)>,
}

impl ModelRegistry {
    pub fn insert(&mut self, model: LoadedModel, source: impl Into<String>) {
        self.models.insert(model.kind().name(), (model, source.into()));
    }

    /// Every `*.json` checkpoint in `dir`, in file-name order; a later file
    /// replaces an earlier one of the same kind.
    pub fn load_dir(&mut self, dir: &Path) -> anyhow::Result<()> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("listing checkpoints in {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        for f in files {
            let model = LoadedModel::load(&f)?;
            log::info!("loaded {} checkpoint {}", model.kind().name(), f.display());
            self.insert(model, f.display().to_string());
        }
        Ok(())
    }

    pub fn get(&self, kind: ModelKind) -> Option<&LoadedModel> {
        self.models.get(kind.name()).map(|(m, _)| m)
    }

    pub fn inventory(&self) -> Vec<ModelInfo> {
        self.models
            .iter()
            .map(|(name, (m, src))| ModelInfo {
                name: name.to_string(),
                source: src.clone(),
                parameters: m.num_parameters(),
                config: m.config_json(),
            })
            .collect()
    }
}

pub struct AppState {
    pub store: ProjectStore,
    pub models: ModelRegistry,
    pub regressor: BodyRegressor,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, message: message.into() }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self { status: StatusCode::NOT_FOUND, message: message.into() }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}", self.message);
        }
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    if body.is_empty() {
        return Err(ApiError::bad_request("request body is empty"));
    }
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || inner.is_syntax() || inner.is_eof() {
            ApiError::bad_request(format!("invalid request body: {inner}"))
        } else {
            ApiError::bad_request(format!("{path}: {inner}"))
        }
    })
}

/// Runs CPU-bound or file-system work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

fn json_bytes(status: StatusCode, bytes: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/models", get(models))
        .route("/sequences", post(post_sequence))
        .route("/sequences/{id}", get(get_sequence))
        .route("/animate", post(animate))
        .route("/predict-order", post(predict_order))
        .route("/translate", post(translate))
        .with_state(state)
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn models(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "models": state.models.inventory() }))
}

/// Checks the body is a move or holds sequence and reports which.
fn classify_sequence(body: &Bytes) -> ApiResult<ArtifactKind> {
    let value: serde_json::Value = parse_body(body)?;
    if value.get("moves").is_some() {
        let seq: MoveSequence =
            serde_json::from_value(value).map_err(|e| ApiError::bad_request(format!("moves: {e}")))?;
        seq.validate().map_err(|e| ApiError::bad_request(format!("moves: {e}")))?;
        Ok(ArtifactKind::MoveSequence)
    } else if value.get("holds").is_some() {
        let seq: HoldsSequence =
            serde_json::from_value(value).map_err(|e| ApiError::bad_request(format!("holds: {e}")))?;
        seq.validate().map_err(|e| ApiError::bad_request(format!("holds: {e}")))?;
        Ok(ArtifactKind::HoldsSequence)
    } else {
        Err(ApiError::bad_request("body must contain `moves` (move sequence) or `holds` (holds sequence)"))
    }
}

async fn post_sequence(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let kind = classify_sequence(&body)?;
    let id = blocking(move || state.store.insert(kind, &body).map_err(ApiError::internal)).await?;
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "id": id, "kind": kind }))).into_response())
}

fn load_sequence(state: &AppState, id: &str) -> ApiResult<(ArtifactKind, Vec<u8>)> {
    match state.store.get(id).map_err(ApiError::internal)? {
        Some((e, bytes)) if matches!(e.kind, ArtifactKind::MoveSequence | ArtifactKind::HoldsSequence) => Ok((e.kind, bytes)),
        _ => Err(ApiError::not_found(format!("no sequence with id `{id}`"))),
    }
}

async fn get_sequence(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let (_, bytes) = blocking(move || load_sequence(&state, &id)).await?;
    Ok(json_bytes(StatusCode::OK, bytes))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnimateRequest {
    sequence_id: String,
    #[serde(default = "default_frames_per_move")]
    frames_per_move: usize,
    #[serde(default)]
    fps: Option<f64>,
}

fn default_frames_per_move() -> usize {
    20
}

async fn animate(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: AnimateRequest = parse_body(&body)?;
    if req.frames_per_move == 0 || req.frames_per_move > MAX_FRAMES_PER_MOVE {
        return Err(ApiError::bad_request(format!("frames_per_move: must lie in 1..={MAX_FRAMES_PER_MOVE}")));
    }
    let fps = req.fps.unwrap_or(DEFAULT_FPS);
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(ApiError::bad_request("fps: must be a positive number"));
    }
    blocking(move || {
        let (kind, bytes) = load_sequence(&state, &req.sequence_id)?;
        if kind != ArtifactKind::MoveSequence {
            return Err(ApiError::bad_request(format!(
                "sequence_id: `{}` is a holds sequence; animation needs limbs and order",
                req.sequence_id
            )));
        }
        let seq: MoveSequence = serde_json::from_slice(&bytes).map_err(ApiError::internal)?;
        let clip = animate_sequence(&seq, req.frames_per_move, fps, &state.regressor)
            .map_err(|e| ApiError::bad_request(format!("sequence_id: {e:#}")))?;
        Ok(json_bytes(StatusCode::OK, serde_json::to_vec(&clip).map_err(ApiError::internal)?))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictRequest {
    holds: Vec<[f64; 2]>,
    model: ModelKind,
    /// The user's own order, scored against the prediction.
    #[serde(default)]
    order: Option<Vec<usize>>,
    #[serde(default)]
    exclude_used: bool,
}

async fn predict_order(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let req: PredictRequest = parse_body(&body)?;
    if req.model == ModelKind::Seq2seq {
        return Err(ApiError::bad_request("model: must be \"art\" or \"simple\""));
    }
    let holds = HoldsSequence {
        holds: req.holds.iter().map(|&[x, y]| Point::new(x, y)).collect(),
        order: req.order,
    };
    holds.validate().map_err(|e| ApiError::bad_request(format!("holds: {e}")))?;
    blocking(move || {
        let model = state
            .models
            .get(req.model)
            .ok_or_else(|| ApiError::not_found(format!("no checkpoint loaded for model `{}`", req.model.name())))?;
        let pred = model.predict_order(&holds, req.exclude_used).map_err(|e| ApiError::bad_request(format!("holds: {e:#}")))?;
        Ok(Json(serde_json::to_value(pred).map_err(ApiError::internal)?))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TranslateRequest {
    /// Space-separated hold words such as `0.2_0.3`.
    holds_sentence: String,
}

async fn translate(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let req: TranslateRequest = parse_body(&body)?;
    let words: Vec<String> = req.holds_sentence.split_whitespace().map(str::to_string).collect();
    blocking(move || {
        let model = state
            .models
            .get(ModelKind::Seq2seq)
            .ok_or_else(|| ApiError::not_found("no checkpoint loaded for model `seq2seq`"))?;
        let out = model.translate(&words).map_err(|e| ApiError::bad_request(format!("holds_sentence: {e:#}")))?;
        Ok(Json(serde_json::json!({ "move_sentence": out.join(" ") })))
    })
    .await
}

pub fn build_state(args: &ServeArgs) -> anyhow::Result<AppState> {
    let store = ProjectStore::open(&args.store)?;
    let mut models = ModelRegistry::default();
    if let Some(dir) = &args.checkpoints {
        models.load_dir(dir)?;
    }
    let regressor = load_regressor(args.regressor.as_deref())?;
    Ok(AppState { store, models, regressor })
}

pub async fn serve(addr: SocketAddr, state: AppState) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await?;
    Ok(())
}

pub fn run_blocking(args: &ServeArgs) -> anyhow::Result<String> {
    let state = build_state(args)?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse().context("--host/--port")?;
    println!("serving {} model(s) on http://{addr}", state.models.inventory().len());
    tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(serve(addr, state))?;
    Ok("server stopped".to_string())
}
