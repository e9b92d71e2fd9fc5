//! HTTP scoring service over one immutable, recurrent headline model.
//!
//! Endpoints: `POST /score`, `GET /health`, `GET /model`. Until a model is
//! installed into the [`ServiceState`], every endpoint answers 503, so a
//! server can start listening while a large model file is still loading.

use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use headpop::corpus::Label;
use headpop::{Model, ModelInfo};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

/// Titles longer than this many bytes are refused with 413.
pub const MAX_TITLE_BYTES: usize = 10_000;

/// Origin allowed by default: the studio UI's dev server.
pub const DEFAULT_CORS_ORIGIN: &str = "http://localhost:5173";

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScoreRequest {
    #[serde(default)]
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub token: String,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub probability: f64,
    pub label: String,
    pub tokens: Vec<TokenScore>,
    pub model_info: ModelInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// A request failure with the status it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_ready() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "model is not loaded yet")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

/// Validates a raw `/score` body and returns the title.
pub fn parse_score_request(body: &[u8]) -> Result<String, ApiError> {
    let req: ScoreRequest = serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))?;
    let title = req.title.ok_or_else(|| ApiError::bad_request("missing field `title`"))?;
    if title.len() > MAX_TITLE_BYTES {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("title is {} bytes; the limit is {MAX_TITLE_BYTES}", title.len()),
        ));
    }
    if title.trim().is_empty() {
        return Err(ApiError::bad_request("title is empty"));
    }
    Ok(title)
}

/// Scores one title: the fused probability plus one contribution per token
/// (after truncation to the model's maximum length).
pub fn score_title(model: &Model, title: &str) -> Result<ScoreResponse, ApiError> {
    let intro = model.introspect(title).map_err(|e| match e {
        headpop::Error::EmptyTitle => ApiError::bad_request("title has no scorable tokens"),
        other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
    })?;
    let prediction = model
        .predict(title)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    if prediction.probability != intro.fused_score {
        return Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "fused score disagrees with model score",
        ));
    }
    Ok(ScoreResponse {
        probability: prediction.probability,
        label: match prediction.label {
            Label::Popular => "popular",
            Label::Unpopular => "unpopular",
        }
        .to_string(),
        tokens: intro
            .contributions
            .into_iter()
            .map(|c| TokenScore {
                token: c.token,
                contribution: c.score,
            })
            .collect(),
        model_info: model.info(),
    })
}

/// Shared handle to the (eventually) loaded model. Cloning is cheap; the
/// model itself is never mutated once installed.
#[derive(Clone, Default)]
pub struct ServiceState {
    model: Arc<OnceLock<Arc<Model>>>,
}

impl ServiceState {
    /// A state with no model; endpoints answer 503 until [`install`](Self::install).
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_model(model: Model) -> Result<Self, String> {
        let state = Self::empty();
        state.install(model)?;
        Ok(state)
    }

    /// Installs the model. Only recurrent models can be served, and a model
    /// can be installed once.
    pub fn install(&self, model: Model) -> Result<(), String> {
        if !model.kind().is_recurrent() {
            return Err(format!(
                "the service needs an lstm or bilstm model, got {}",
                model.kind()
            ));
        }
        self.model
            .set(Arc::new(model))
            .map_err(|_| "a model is already installed".to_string())
    }

    pub fn model(&self) -> Option<&Arc<Model>> {
        self.model.get()
    }

    pub fn is_ready(&self) -> bool {
        self.model.get().is_some()
    }

    fn require(&self) -> Result<&Arc<Model>, ApiError> {
        self.model().ok_or_else(ApiError::not_ready)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    /// Allowed CORS origin; `"*"` allows any.
    pub cors_origin: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            cors_origin: DEFAULT_CORS_ORIGIN.to_string(),
        }
    }
}

fn cors(origin: &str) -> Result<CorsLayer, String> {
    let allow = if origin == "*" {
        AllowOrigin::any()
    } else {
        let value = HeaderValue::from_str(origin).map_err(|_| format!("invalid CORS origin {origin:?}"))?;
        AllowOrigin::exact(value)
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]))
}

pub fn router(state: ServiceState, config: &ServiceConfig) -> Result<Router, String> {
    Ok(Router::new()
        .route("/score", post(score))
        .route("/health", get(health))
        .route("/model", get(model_info))
        .layer(cors(&config.cors_origin)?)
        .with_state(state))
}

async fn score(State(state): State<ServiceState>, body: Bytes) -> Result<Json<ScoreResponse>, ApiError> {
    let model = state.require()?;
    let title = parse_score_request(&body)?;
    score_title(model, &title).map(Json)
}

async fn health(State(state): State<ServiceState>) -> Response {
    if state.is_ready() {
        Json(serde_json::json!({"status": "ok"})).into_response()
    } else {
        (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(serde_json::json!({"status": "loading"})),
        )
            .into_response()
    }
}

async fn model_info(State(state): State<ServiceState>) -> Result<Json<ModelInfo>, ApiError> {
    Ok(Json(state.require()?.info()))
}

/// Serves `app` on `listener` until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("listening on http://{addr}");
    }
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
