//! HTTP API. All payloads are JSON; export is JSON lines.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use barec_core::corpus::Split;
use serde::Deserialize;
use serde_json::json;

use crate::error::ServiceError;
use crate::model::{AnnotationEvent, Batch};
use crate::service::{
    AnnotationResponse, CreateBatch, OpenRound, RecordUl, RoundView, SentenceView, Service,
    UlResponse, ValidateRequest, ValidateResponse,
};
use crate::state::{ExportFilter, StatusFilter};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict { .. } | ServiceError::Locked(_) => StatusCode::CONFLICT,
            ServiceError::Unauthorized(_) => StatusCode::FORBIDDEN,
            ServiceError::InsufficientPool { .. } | ServiceError::RationaleRequired(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::Invalid(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": self.kind(), "message": self.to_string() });
        if let ServiceError::Conflict { latest, expected } = &self {
            body["expected_version"] = json!(expected);
            body["latest"] = json!(latest);
        }
        (status, Json(body)).into_response()
    }
}

type Shared = State<Arc<Service>>;
type ApiResult<T> = Result<Json<T>, ServiceError>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/batches", post(create_batch))
        .route("/batches/{annotator}", get(list_batches))
        .route("/batches/{batch}/submit", post(submit_batch))
        .route("/sentences/{id}", get(get_sentence))
        .route("/annotations", post(post_annotation))
        .route("/validate", post(validate))
        .route("/unification/rounds", post(open_round))
        .route("/unification/{round}", get(get_round))
        .route("/unification/{round}/ul", post(record_ul))
        .route("/unification/{round}/close", post(close_round))
        .route("/export", get(export))
        .with_state(service)
}

async fn create_batch(State(s): Shared, Json(req): Json<CreateBatch>) -> ApiResult<Batch> {
    s.create_batch(&req).map(Json)
}

async fn list_batches(State(s): Shared, Path(annotator): Path<String>) -> ApiResult<Vec<Batch>> {
    Ok(Json(s.batches_for(&annotator)))
}

#[derive(Deserialize)]
struct SubmitBody {
    annotator: String,
}

async fn submit_batch(
    State(s): Shared,
    Path(batch): Path<String>,
    Json(body): Json<SubmitBody>,
) -> ApiResult<Batch> {
    s.submit_batch(&batch, &body.annotator).map(Json)
}

async fn get_sentence(State(s): Shared, Path(id): Path<String>) -> ApiResult<SentenceView> {
    s.sentence(&id).map(Json)
}

async fn post_annotation(
    State(s): Shared,
    Json(a): Json<AnnotationEvent>,
) -> ApiResult<AnnotationResponse> {
    s.submit_annotation(a).map(Json)
}

async fn validate(State(s): Shared, Json(req): Json<ValidateRequest>) -> ApiResult<ValidateResponse> {
    s.validate(&req).map(Json)
}

async fn open_round(State(s): Shared, Json(req): Json<OpenRound>) -> ApiResult<RoundView> {
    s.open_unification(&req).map(Json)
}

async fn get_round(State(s): Shared, Path(round): Path<String>) -> ApiResult<RoundView> {
    s.round(&round).map(Json)
}

async fn record_ul(
    State(s): Shared,
    Path(round): Path<String>,
    Json(req): Json<RecordUl>,
) -> ApiResult<UlResponse> {
    s.record_ul(&round, &req).map(Json)
}

#[derive(Deserialize)]
struct CloseBody {
    by: String,
}

async fn close_round(
    State(s): Shared,
    Path(round): Path<String>,
    Json(body): Json<CloseBody>,
) -> ApiResult<RoundView> {
    s.close_round(&round, &body.by).map(Json)
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    split: Option<String>,
    #[serde(default)]
    status: Option<String>,
}

async fn export(State(s): Shared, Query(q): Query<ExportQuery>) -> Result<Response, ServiceError> {
    let split = match q.split.as_deref() {
        None | Some("") => None,
        Some(v) => Some(v.parse::<Split>().map_err(ServiceError::Invalid)?),
    };
    let status = q
        .status
        .as_deref()
        .unwrap_or("")
        .parse::<StatusFilter>()
        .map_err(ServiceError::Invalid)?;
    let body = s.export_bytes(&ExportFilter { split, status });
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

/// Serves the API until Ctrl-C.
pub async fn serve(service: Arc<Service>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
