//! JSON-over-HTTP facade for interactive clients.
//!
//! | route              | method | body                     |
//! |--------------------|--------|--------------------------|
//! | `/api/health`      | GET    | status, load flag, version |
//! | `/api/catalog`     | GET    | symptoms and diseases with ids |
//! | `/api/infer`       | POST   | [`InferRequest`] -> [`InferResponse`] |
//! | `/api/spec`        | GET    | OpenAPI document         |

use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::engine::{Algorithm, SymptomChecker};
use crate::error::Error;
use crate::model::{encode_observation_ids, AbsenceMode};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shared server state. The checker is absent until [`AppState::load`].
#[derive(Clone, Default)]
pub struct AppState {
    checker: Arc<RwLock<Option<Arc<SymptomChecker>>>>,
}

impl AppState {
    pub fn empty() -> Self {
        AppState::default()
    }

    pub fn loaded(checker: SymptomChecker) -> Self {
        let state = AppState::empty();
        state.load(checker);
        state
    }

    pub fn load(&self, checker: SymptomChecker) {
        *self.checker.write().expect("state lock") = Some(Arc::new(checker));
    }

    fn get(&self) -> Option<Arc<SymptomChecker>> {
        self.checker.read().expect("state lock").clone()
    }
}

fn default_algorithm() -> String {
    "gvamp".to_string()
}

fn default_top_k() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferRequest {
    #[serde(default)]
    pub present: Vec<usize>,
    #[serde(default)]
    pub absent: Vec<usize>,
    #[serde(default = "default_algorithm")]
    pub algorithm: String,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub absence_mode: AbsenceMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDisease {
    pub disease_id: usize,
    pub disease_name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub algorithm: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferResponse {
    pub ranking: Vec<RankedDisease>,
    pub diagnostics: Diagnostics,
    pub request_echo: InferRequest,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn not_loaded() -> ApiError {
    ApiError(
        StatusCode::SERVICE_UNAVAILABLE,
        "catalog and matrix are not loaded".into(),
    )
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "catalog_loaded": state.get().is_some(),
        "version": VERSION,
    }))
}

async fn catalog(State(state): State<AppState>) -> Result<Json<Value>, ApiError> {
    let checker = state.get().ok_or_else(not_loaded)?;
    let c = checker.catalog();
    let list = |names: &[String]| -> Vec<Value> {
        names
            .iter()
            .enumerate()
            .map(|(id, name)| json!({ "id": id, "name": name }))
            .collect()
    };
    Ok(Json(json!({
        "symptoms": list(c.symptoms()),
        "diseases": list(c.diseases()),
    })))
}

/// Runs one request against a loaded checker.
pub fn handle_infer(checker: &SymptomChecker, request: InferRequest) -> Result<InferResponse, (StatusCode, String)> {
    let algorithm: Algorithm = request
        .algorithm
        .parse()
        .map_err(|e: Error| (StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let catalog = checker.catalog();
    let n = catalog.disease_count();
    if request.top_k == 0 || request.top_k > n {
        return Err((
            StatusCode::BAD_REQUEST,
            format!("top_k must lie in 1..={n}, got {}", request.top_k),
        ));
    }
    let obs = encode_observation_ids(
        &request.present,
        &request.absent,
        catalog.symptom_count(),
        request.absence_mode,
    )
    .map_err(|e| match e {
        Error::Contradiction(id) => (
            StatusCode::BAD_REQUEST,
            format!("symptom {id} is listed as both present and absent"),
        ),
        other => (StatusCode::BAD_REQUEST, other.to_string()),
    })?;
    let inference = checker.infer(&obs, algorithm).map_err(|e| {
        let status = if e.is_numerical() {
            StatusCode::INTERNAL_SERVER_ERROR
        } else {
            StatusCode::BAD_REQUEST
        };
        (status, e.to_string())
    })?;
    Ok(InferResponse {
        ranking: inference
            .top(request.top_k)
            .into_iter()
            .map(|(id, score)| RankedDisease {
                disease_id: id,
                disease_name: catalog.diseases()[id].clone(),
                score,
            })
            .collect(),
        diagnostics: Diagnostics {
            iterations: inference.iterations,
            converged: inference.converged,
            algorithm: algorithm.name().to_string(),
        },
        request_echo: request,
    })
}

async fn infer(
    State(state): State<AppState>,
    body: Result<Json<InferRequest>, JsonRejection>,
) -> Result<Json<InferResponse>, ApiError> {
    let Json(request) = body.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    let checker = state.get().ok_or_else(not_loaded)?;
    let result = tokio::task::spawn_blocking(move || handle_infer(&checker, request))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    result.map(Json).map_err(|(status, msg)| ApiError(status, msg))
}

/// OpenAPI 3 description of the routes.
pub fn openapi() -> Value {
    json!({
        "openapi": "3.0.3",
        "info": { "title": "ampdx symptom checker", "version": VERSION },
        "paths": {
            "/api/health": { "get": { "responses": { "200": { "description": "status, catalog_loaded, version" } } } },
            "/api/catalog": { "get": { "responses": {
                "200": { "description": "symptoms and diseases as {id, name} lists" },
                "503": { "description": "not loaded" }
            } } },
            "/api/infer": { "post": {
                "requestBody": { "content": { "application/json": { "schema": { "$ref": "#/components/schemas/InferRequest" } } } },
                "responses": {
                    "200": { "content": { "application/json": { "schema": { "$ref": "#/components/schemas/InferResponse" } } } },
                    "400": { "description": "invalid ids, contradiction or top_k" },
                    "422": { "description": "unknown algorithm" },
                    "500": { "description": "numerical failure" },
                    "503": { "description": "not loaded" }
                }
            } },
            "/api/spec": { "get": { "responses": { "200": { "description": "this document" } } } }
        },
        "components": { "schemas": {
            "InferRequest": { "type": "object", "properties": {
                "present": { "type": "array", "items": { "type": "integer" } },
                "absent": { "type": "array", "items": { "type": "integer" } },
                "algorithm": { "type": "string", "enum": ["gvamp", "admm", "uls", "scan"], "default": "gvamp" },
                "top_k": { "type": "integer", "minimum": 1, "default": 3 },
                "absence_mode": { "type": "string", "enum": ["assume-absent", "treat-missing"], "default": "assume-absent" }
            } },
            "InferResponse": { "type": "object", "properties": {
                "ranking": { "type": "array", "items": { "type": "object", "properties": {
                    "disease_id": { "type": "integer" },
                    "disease_name": { "type": "string" },
                    "score": { "type": "number" }
                } } },
                "diagnostics": { "type": "object", "properties": {
                    "iterations": { "type": "integer" },
                    "converged": { "type": "boolean" },
                    "algorithm": { "type": "string" }
                } },
                "request_echo": { "$ref": "#/components/schemas/InferRequest" }
            } }
        } }
    })
}

async fn spec() -> Json<Value> {
    Json(openapi())
}

/// Builds the application router; `static_dir`, when given, is served for
/// every path outside `/api`.
pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/catalog", get(catalog))
        .route("/api/infer", post(infer))
        .route("/api/spec", get(spec))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::permissive())
}
