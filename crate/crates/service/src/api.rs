use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::session::{BatchView, Progress, Session, SessionConfig, SubmitOutcome};
use crate::{Result, ServiceError, SessionStore};

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/session", post(create_session))
        .route("/session/{id}/batch", get(batch))
        .route("/session/{id}/labels", post(labels))
        .route("/session/{id}/progress", get(progress))
        .with_state(store)
}

struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(ServiceError::BadRequest(e.body_text()))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

/// Selection and retraining are CPU-bound; keep them off the async workers.
async fn blocking<T: Send + 'static>(
    store: Arc<SessionStore>,
    id: String,
    f: impl FnOnce(&mut Session) -> Result<T> + Send + 'static,
) -> std::result::Result<T, ApiError> {
    tokio::task::spawn_blocking(move || store.with_session(&id, f))
        .await
        .map_err(|e| ApiError(ServiceError::Corrupt(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub progress: Progress,
}

async fn create_session(
    State(store): State<Arc<SessionStore>>,
    body: std::result::Result<Json<SessionConfig>, JsonRejection>,
) -> std::result::Result<(StatusCode, Json<Created>), ApiError> {
    let Json(config) = body?;
    let created = tokio::task::spawn_blocking(move || -> Result<Created> {
        let session_id = store.create(config)?;
        let progress = store.with_session(&session_id, |s| Ok(s.progress()))?;
        Ok(Created { session_id, progress })
    })
    .await
    .map_err(|e| ApiError(ServiceError::Corrupt(format!("worker failed: {e}"))))??;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn batch(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<BatchView> {
    blocking(store, id, |s| s.current_batch()).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct LabelsBody {
    labels: BTreeMap<String, Value>,
}

async fn labels(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: std::result::Result<Json<LabelsBody>, JsonRejection>,
) -> ApiResult<SubmitOutcome> {
    let Json(body) = body?;
    blocking(store, id, move |s| s.submit(&body.labels)).await.map(Json)
}

async fn progress(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<Value> {
    let p = blocking(store, id, |s| Ok(s.progress())).await?;
    Ok(Json(json!({ "progress": p })))
}
