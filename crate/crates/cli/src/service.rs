//! HTTP API over immutable, preloaded inverse models.

use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Request, State};
use axum::http::{HeaderName, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tower_http::services::ServeDir;

use floatnorm::cascade::{
    extract, two_stage_extract, ExtractionRequest, ModelSet, SaturationThresholds, TwoStageRequest,
};
use floatnorm::surrogate::Surrogate;
use floatnorm::{Error, Stage};

use crate::wire::{self, parameter_list, parse_stage, ErrorBody, ExtractBody, SimulateRequest};

/// Response header naming the model content hash(es) behind a response.
pub static MODEL_HASH_HEADER: HeaderName = HeaderName::from_static("x-model-hash");

pub struct AppState {
    pub models: ModelSet,
    pub simulator: Surrogate,
    pub thresholds: SaturationThresholds,
}

impl AppState {
    pub fn new(models: ModelSet) -> Arc<Self> {
        Arc::new(Self {
            models,
            simulator: Surrogate::new(),
            thresholds: SaturationThresholds::default(),
        })
    }

    /// `stage:hash` pairs of every loaded model, comma separated.
    fn all_hashes(&self) -> String {
        self.models
            .versions()
            .into_iter()
            .map(|(s, h)| format!("{s}:{h}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub type SharedState = Arc<AppState>;

pub fn router(state: SharedState, static_dir: Option<&Path>) -> Router {
    let mut app = Router::new()
        .route("/api/health", get(health))
        .route("/api/parameters", get(parameters))
        .route("/api/extract", post(extract_handler))
        .route("/api/simulate", post(simulate_handler))
        .route("/api/two-stage-extract", post(two_stage_handler));
    if let Some(dir) = static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.layer(middleware::from_fn_with_state(state.clone(), tag_model_hash))
        .with_state(state)
}

/// Adds the loaded-model hashes to responses whose handler did not name one.
async fn tag_model_hash(State(state): State<SharedState>, req: Request, next: Next) -> Response {
    let mut resp = next.run(req).await;
    if !resp.headers().contains_key(&MODEL_HASH_HEADER) {
        if let Ok(v) = HeaderValue::from_str(&state.all_hashes()) {
            resp.headers_mut().insert(MODEL_HASH_HEADER.clone(), v);
        }
    }
    resp
}

struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, body: ErrorBody) -> Self {
        Self { status, body }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Constraint { .. } | Error::InvalidInput(_) | Error::Domain(_) | Error::Json(_) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, ErrorBody::from(&e))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, ErrorBody::new("malformed", e.to_string())))
}

fn stage_of(name: &str) -> Result<Stage, ApiError> {
    parse_stage(name).map_err(|b| ApiError::new(StatusCode::NOT_FOUND, b))
}

fn with_hash(value: impl Serialize, hash: &str) -> Response {
    let mut resp = Json(value).into_response();
    if let Ok(v) = HeaderValue::from_str(hash) {
        resp.headers_mut().insert(MODEL_HASH_HEADER.clone(), v);
    }
    resp
}

fn not_loaded(stage: Stage) -> ApiError {
    ApiError::new(
        StatusCode::SERVICE_UNAVAILABLE,
        ErrorBody::new("model_unavailable", format!("no {stage} inverse model loaded")),
    )
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    model_versions: std::collections::BTreeMap<String, String>,
}

async fn health(State(state): State<SharedState>) -> Json<Health> {
    Json(Health {
        status: "ok",
        model_versions: state
            .models
            .versions()
            .into_iter()
            .map(|(s, h)| (s.to_string(), h))
            .collect(),
    })
}

async fn parameters() -> Json<Vec<floatnorm::sampling::ParameterSpec>> {
    Json(parameter_list())
}

async fn extract_handler(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    let req: ExtractBody = parse_body(&body)?;
    let stage = stage_of(&req.stage)?;
    let model = state.models.get(stage).ok_or_else(|| not_loaded(stage))?;
    let req = ExtractionRequest {
        stage,
        curve: req.curve,
        constraints: req.constraints,
        fixed_phig: req.fixed_phig,
    };
    let result = extract(&req, model, &state.simulator, &state.thresholds)?;
    Ok(with_hash(&result, &model.hash))
}

async fn simulate_handler(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    let req: SimulateRequest = parse_body(&body)?;
    let stage = stage_of(&req.stage)?;
    let resp = wire::simulate(&state.simulator, stage, &req)?;
    Ok(Json(resp).into_response())
}

async fn two_stage_handler(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    let req: TwoStageRequest = parse_body(&body)?;
    let cgg = state.models.get(Stage::Cgg).ok_or_else(|| not_loaded(Stage::Cgg))?;
    let id = state.models.get(Stage::Id).ok_or_else(|| not_loaded(Stage::Id))?;
    let result = two_stage_extract(&req, cgg, id, &state.simulator, &state.thresholds)?;
    Ok(with_hash(&result, &format!("cgg:{},id:{}", cgg.hash, id.hash)))
}
