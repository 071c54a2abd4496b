//! HTTP API under `/api/v1`. The loaded model is immutable shared state;
//! each counterfactual request derives its own RNG stream from its seed.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use flowcf::parallel::Execution;
use flowcf::pipeline::api::{self, CfRequest, ScoreRequest};
use flowcf::pipeline::Model;
use flowcf::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Clone)]
struct AppState {
    model: Arc<Model>,
    exec: Execution,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Serialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Encoding(_) | Error::Config(_) | Error::Json(_) | Error::Width { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError { status, code: e.code().to_string(), message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: ErrorDetail { code: self.code, message: self.message } };
        (self.status, Json(body)).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> std::result::Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError {
        status: StatusCode::BAD_REQUEST,
        code: "invalid_body".into(),
        message: e.to_string(),
    })
}

pub fn router(model: Arc<Model>, exec: Execution) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/v1/schema", get(schema))
        .route("/api/v1/score", post(score))
        .route("/api/v1/counterfactuals", post(counterfactuals))
        .with_state(AppState { model, exec })
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn schema(State(s): State<AppState>) -> Json<api::SchemaResponse> {
    Json(api::schema(&s.model))
}

async fn score(State(s): State<AppState>, body: Bytes) -> std::result::Result<Json<api::ScoreResponse>, ApiError> {
    let req: ScoreRequest = parse(&body)?;
    Ok(Json(api::score(&s.model, &req)?))
}

async fn counterfactuals(State(s): State<AppState>, body: Bytes) -> std::result::Result<Json<api::CfResponse>, ApiError> {
    let req: CfRequest = parse(&body)?;
    let res = tokio::task::spawn_blocking(move || api::counterfactuals(&s.model, &req, s.exec))
        .await
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, code: "internal".into(), message: e.to_string() })??;
    Ok(Json(res))
}

/// Blocks serving until interrupted.
pub fn serve(model: Arc<Model>, bind: &str, exec: Execution) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io(bind, e))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| Error::io(bind, e))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| Error::io(bind, e))?);
        axum::serve(listener, router(model, exec))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::io(bind, e))
    })
}
