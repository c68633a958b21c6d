use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

use arppf_core::preprocess::PreprocessError;
use arppf_core::query::QueryError;
use arppf_core::store::StoreError;

/// Error body returned by every failing endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        }
        (self.status, Json(&self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::UnknownSeries(id) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown-series", message)
                    .with_detail(json!({ "series_id": id }))
            }
            StoreError::NoData(id) => ApiError::new(StatusCode::NOT_FOUND, "no-data", message)
                .with_detail(json!({ "series_id": id })),
            StoreError::InvalidSeriesId(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid-series-id", message)
            }
            StoreError::BadHeader(_) => ApiError::new(StatusCode::BAD_REQUEST, "malformed-csv", message)
                .with_detail(json!({ "row": 1 })),
            StoreError::MalformedRow { row, .. } | StoreError::Encoding { row } => {
                ApiError::new(StatusCode::BAD_REQUEST, "malformed-csv", message)
                    .with_detail(json!({ "row": row }))
            }
            StoreError::OutOfOrder { row, t, previous } => {
                ApiError::new(StatusCode::CONFLICT, "out-of-order", message)
                    .with_detail(json!({ "row": row, "t": t, "previous": previous }))
            }
            StoreError::InvalidRange { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-range", message)
            }
            StoreError::Preprocess(PreprocessError::InvalidConfig(_)) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-parameters", message)
            }
            _ => ApiError::internal(message),
        }
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let message = e.to_string();
        match e {
            QueryError::UnknownSeries(id) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown-series", message)
                    .with_detail(json!({ "series_id": id }))
            }
            QueryError::InvalidParams(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-range", message)
            }
            QueryError::NoSegments(id) => ApiError::new(StatusCode::CONFLICT, "no-segments", message)
                .with_detail(json!({ "series_id": id })),
            QueryError::Store(e) => e.into(),
            QueryError::Grid(_) => ApiError::internal(message),
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-range", e.body_text())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-parameters", e.body_text())
    }
}
