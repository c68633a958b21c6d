//! HTTP front-end for an arppf [`Store`].
//!
//! | method | path                              | body / query                              |
//! |--------|-----------------------------------|-------------------------------------------|
//! | GET    | `/api/series`                     |                                           |
//! | POST   | `/api/series/{id}/ingest`         | CSV with a `t,v` header                   |
//! | POST   | `/api/series/{id}/preprocess`     | `{"t_pre": 1, "passes": 5, "n_v": 100}`   |
//! | GET    | `/api/series/{id}/points`         | `from`, `to`, `buckets_t`, `buckets_v`, `mode` |
//!
//! JSON schemas for every response live in `schemas/` next to this crate.

use std::io;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{HeaderValue, Method};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::trace::TraceLayer;

use arppf_core::preprocess::{BatchConfig, PreprocessReport};
use arppf_core::query::{
    run_query, QueryMode, QueryOptions, QueryParams, QueryPath, QueryResult, DEFAULT_BUCKETS_T,
    DEFAULT_BUCKETS_V,
};
use arppf_core::store::{SeriesCatalogEntry, Store};

mod error;

pub use error::ApiError;

/// Default bind address and port of `arppf serve`.
pub const DEFAULT_ADDR: &str = "127.0.0.1";
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Allowed browser origin; `None` allows any origin.
    pub cors_origin: Option<HeaderValue>,
    /// Largest accepted request body in bytes.
    pub body_limit: usize,
    pub query: QueryOptions,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            cors_origin: None,
            body_limit: 256 * 1024 * 1024,
            query: QueryOptions::default(),
        }
    }
}

#[derive(Clone)]
struct AppState {
    store: Arc<Store>,
    query: QueryOptions,
}

pub fn router(store: Arc<Store>, config: &ServiceConfig) -> Router {
    let origin = match &config.cors_origin {
        Some(o) => AllowOrigin::exact(o.clone()),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);

    Router::new()
        .route("/api/series", get(list_series))
        .route("/api/series/{id}/ingest", post(ingest))
        .route("/api/series/{id}/preprocess", post(preprocess))
        .route("/api/series/{id}/points", get(points))
        .layer(DefaultBodyLimit::max(config.body_limit))
        .layer(cors)
        .layer(TraceLayer::new_for_http())
        .with_state(AppState {
            store,
            query: config.query,
        })
}

/// Serves `router` on `listener` until Ctrl-C.
pub async fn serve(listener: TcpListener, router: Router) -> io::Result<()> {
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Store calls touch the filesystem, so they run off the async workers.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn list_series(State(state): State<AppState>) -> Result<Json<Vec<SeriesCatalogEntry>>, ApiError> {
    let store = state.store.clone();
    blocking(move || Ok(store.list_series()?)).await.map(Json)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IngestResponse {
    pub ingested: usize,
}

async fn ingest(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<IngestResponse>, ApiError> {
    let store = state.store.clone();
    let ingested = blocking(move || Ok(store.ingest_csv(&id, body.as_ref())?)).await?;
    Ok(Json(IngestResponse { ingested }))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessRequest {
    pub t_pre: f64,
    pub passes: usize,
    pub n_v: usize,
}

async fn preprocess(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<PreprocessRequest>, JsonRejection>,
) -> Result<Json<PreprocessReport>, ApiError> {
    let Json(req) = body?;
    let config = BatchConfig {
        t_pre: req.t_pre,
        passes: req.passes,
        n_v_pre: req.n_v,
    };
    let store = state.store.clone();
    blocking(move || Ok(store.preprocess(&id, &config)?)).await.map(Json)
}

#[derive(Debug, Clone, Deserialize)]
pub struct PointsQuery {
    pub from: f64,
    pub to: f64,
    pub buckets_t: Option<usize>,
    pub buckets_v: Option<usize>,
    pub mode: Option<QueryMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetGridInfo {
    pub n_t: usize,
    pub n_v: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub diagonal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointsMeta {
    pub path: QueryPath,
    pub points_fetched: usize,
    pub points_returned: usize,
    pub distance_bound: f64,
    pub elapsed_ms: f64,
    pub aligned_from: f64,
    pub aligned_to: f64,
    pub raw_points_scanned: usize,
    pub target_grid: Option<TargetGridInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointsResponse {
    pub points: Vec<[f64; 2]>,
    pub meta: PointsMeta,
}

impl From<QueryResult> for PointsResponse {
    fn from(res: QueryResult) -> Self {
        let m = res.meta;
        PointsResponse {
            points: res.points.iter().map(|p| [p.t, p.v]).collect(),
            meta: PointsMeta {
                path: m.path,
                points_fetched: m.points_fetched,
                points_returned: m.points_returned,
                distance_bound: m.distance_bound,
                elapsed_ms: m.elapsed.as_secs_f64() * 1e3,
                aligned_from: m.aligned_from,
                aligned_to: m.aligned_to,
                raw_points_scanned: m.raw_points_scanned,
                target_grid: m.target_grid.map(|g| TargetGridInfo {
                    n_t: g.n_t(),
                    n_v: g.n_v(),
                    v_min: g.v_range().0,
                    v_max: g.v_range().1,
                    diagonal: g.diagonal(),
                }),
            },
        }
    }
}

async fn points(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<PointsQuery>, QueryRejection>,
) -> Result<Json<PointsResponse>, ApiError> {
    let Query(q) = query?;
    let params = QueryParams::new(id, q.from, q.to)
        .buckets(
            q.buckets_t.unwrap_or(DEFAULT_BUCKETS_T),
            q.buckets_v.unwrap_or(DEFAULT_BUCKETS_V),
        )
        .mode(q.mode.unwrap_or_default());
    let store = state.store.clone();
    let options = state.query;
    let result = blocking(move || Ok(run_query(&store, &params, &options)?)).await?;
    Ok(Json(result.into()))
}
