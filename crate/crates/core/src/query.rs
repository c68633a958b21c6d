//! Two-tier range queries.
//!
//! Short spans are answered from raw data: read the range, build the target
//! grid from the viewport and filter once. Longer spans are widened to whole
//! batches and answered from the preprocessed segments, which are filtered
//! again through the target grid. The value axis of the target grid always
//! spans the exact raw extent of the range, so both paths draw the same axes.
//!
//! Every result carries a bound on the directed Hausdorff distance from the
//! raw points of the range to the returned points: `D_target` on the raw
//! path, `max_i Σ D_i + D_target` on the preprocessed path.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::rppf_points;
use crate::grid::{make_grid, BucketGrid, GridError};
use crate::preprocess::{batch_index_of, Segment};
use crate::series::{DataPoint, Series};
use crate::store::{SeriesCatalogEntry, Store, StoreError};

pub const DEFAULT_BUCKETS_T: usize = 300;
pub const DEFAULT_BUCKETS_V: usize = 100;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("unknown series {0:?}")]
    UnknownSeries(String),
    #[error("invalid query: {0}")]
    InvalidParams(String),
    #[error("series {0:?} has no preprocessed segments")]
    NoSegments(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Store(StoreError),
}

impl From<StoreError> for QueryError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownSeries(id) => QueryError::UnknownSeries(id),
            other => QueryError::Store(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    #[default]
    Auto,
    Raw,
    Preprocessed,
}

impl FromStr for QueryMode {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(QueryMode::Auto),
            "raw" => Ok(QueryMode::Raw),
            "preprocessed" => Ok(QueryMode::Preprocessed),
            other => Err(QueryError::InvalidParams(format!(
                "mode must be auto, raw or preprocessed (got {other:?})"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryPath {
    Raw,
    Preprocessed,
}

impl fmt::Display for QueryPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryPath::Raw => "raw",
            QueryPath::Preprocessed => "preprocessed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryParams {
    pub series_id: String,
    pub t_from: f64,
    pub t_to: f64,
    pub n_t_target: usize,
    pub n_v_target: usize,
    pub mode: QueryMode,
}

impl QueryParams {
    pub fn new(series_id: impl Into<String>, t_from: f64, t_to: f64) -> Self {
        Self {
            series_id: series_id.into(),
            t_from,
            t_to,
            n_t_target: DEFAULT_BUCKETS_T,
            n_v_target: DEFAULT_BUCKETS_V,
            mode: QueryMode::Auto,
        }
    }

    pub fn buckets(mut self, n_t: usize, n_v: usize) -> Self {
        self.n_t_target = n_t;
        self.n_v_target = n_v;
        self
    }

    pub fn mode(mut self, mode: QueryMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if !(self.t_from.is_finite() && self.t_to.is_finite() && self.t_to > self.t_from) {
            return Err(QueryError::InvalidParams(format!(
                "range must satisfy from < to (got [{}, {}))",
                self.t_from, self.t_to
            )));
        }
        if self.n_t_target == 0 || self.n_v_target == 0 {
            return Err(QueryError::InvalidParams("bucket counts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.t_to - self.t_from
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryOptions {
    /// Spans strictly below this go to raw data in auto mode. Defaults to
    /// `n_t_target · t_pre`, the shortest span whose time buckets are at
    /// least one batch wide.
    pub raw_cutoff_span: Option<f64>,
}

/// Target grid before its value extent is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub t_from: f64,
    pub t_to: f64,
    pub n_t: usize,
    pub n_v: usize,
}

impl TargetSpec {
    pub fn bucket_width(&self) -> f64 {
        (self.t_to - self.t_from) / self.n_t as f64
    }

    pub fn grid(&self, v_range: (f64, f64)) -> Result<BucketGrid, GridError> {
        make_grid((self.t_from, self.t_to), v_range, self.n_t, self.n_v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub series_id: String,
    pub path: QueryPath,
    pub aligned_range: (f64, f64),
    pub target: TargetSpec,
    /// Inclusive batch index range (preprocessed path only).
    pub segments_needed: Option<(i64, i64)>,
    pub t_pre: Option<f64>,
    pub raw_cutoff_reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMeta {
    pub path: QueryPath,
    pub raw_points_scanned: usize,
    pub points_fetched: usize,
    pub points_returned: usize,
    pub target_grid: Option<BucketGrid>,
    pub distance_bound: f64,
    pub elapsed: Duration,
    pub aligned_from: f64,
    pub aligned_to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub points: Series,
    pub meta: QueryMeta,
}

/// Chooses the raw or preprocessed path and aligns the range.
pub fn resolve_query(
    params: &QueryParams,
    catalog: &SeriesCatalogEntry,
    options: &QueryOptions,
) -> Result<QueryPlan, QueryError> {
    params.validate()?;
    let t_pre = catalog
        .preprocess_config
        .filter(|_| catalog.segment_count > 0)
        .map(|c| c.t_pre);
    let span = params.span();

    let (path, reason) = match (params.mode, t_pre) {
        (QueryMode::Raw, _) => (QueryPath::Raw, "raw path requested".to_string()),
        (QueryMode::Preprocessed, None) => {
            return Err(QueryError::NoSegments(params.series_id.clone()))
        }
        (QueryMode::Preprocessed, Some(_)) => (
            QueryPath::Preprocessed,
            "preprocessed path requested".to_string(),
        ),
        (QueryMode::Auto, None) => (
            QueryPath::Raw,
            "series has no preprocessed segments".to_string(),
        ),
        (QueryMode::Auto, Some(t_pre)) => {
            let cutoff = options
                .raw_cutoff_span
                .unwrap_or(params.n_t_target as f64 * t_pre);
            if span < cutoff {
                (QueryPath::Raw, format!("span {span} is below the raw cutoff {cutoff}"))
            } else {
                (
                    QueryPath::Preprocessed,
                    format!("span {span} is at or above the raw cutoff {cutoff}"),
                )
            }
        }
    };

    let (aligned_range, segments_needed) = match (path, t_pre) {
        (QueryPath::Preprocessed, Some(t_pre)) => {
            let first = batch_index_of(params.t_from, t_pre);
            let mut last = batch_index_of(params.t_to, t_pre);
            if (last as f64) * t_pre >= params.t_to {
                last -= 1;
            }
            (
                (first as f64 * t_pre, (last + 1) as f64 * t_pre),
                Some((first, last)),
            )
        }
        _ => ((params.t_from, params.t_to), None),
    };

    if path == QueryPath::Preprocessed {
        if let Some(cfg) = catalog.preprocess_config {
            if cfg.n_v_pre < params.n_v_target {
                tracing::debug!(
                    n_v_pre = cfg.n_v_pre,
                    n_v_target = params.n_v_target,
                    "preprocessing grid is coarser in value than the target grid"
                );
            }
        }
    }

    Ok(QueryPlan {
        series_id: params.series_id.clone(),
        path,
        aligned_range,
        target: TargetSpec {
            t_from: aligned_range.0,
            t_to: aligned_range.1,
            n_t: params.n_t_target,
            n_v: params.n_v_target,
        },
        segments_needed,
        t_pre: if path == QueryPath::Preprocessed { t_pre } else { None },
        raw_cutoff_reason: reason,
    })
}

/// Value extent over the raw points summarised by `segments`.
pub fn segment_value_extent(segments: &[Segment]) -> Option<(f64, f64)> {
    segments
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| (s.v_min, s.v_max))
        .reduce(|(a, b), (c, d)| (a.min(c), b.max(d)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFilterOutput {
    pub points: Vec<DataPoint>,
    pub points_fetched: usize,
    pub raw_points_scanned: usize,
    /// `max_i Σ D_i + D_target`
    pub distance_bound: f64,
}

/// Concatenates the retained points of `segments` in time order and filters
/// them through `grid`.
pub fn filter_segments(segments: &[Segment], grid: &BucketGrid) -> Result<SegmentFilterOutput, GridError> {
    let mut ordered: Vec<&Segment> = segments.iter().collect();
    ordered.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
    let fetched: Vec<DataPoint> = ordered
        .iter()
        .flat_map(|s| s.retained.iter().copied())
        .collect();
    let preprocess_bound = ordered
        .iter()
        .map(|s| s.distance_bound())
        .fold(0.0, f64::max);
    Ok(SegmentFilterOutput {
        points: rppf_points(&fetched, grid)?,
        points_fetched: fetched.len(),
        raw_points_scanned: ordered.iter().map(|s| s.raw_count).sum(),
        distance_bound: preprocess_bound + grid.diagonal(),
    })
}

/// Runs a resolved plan against the store.
pub fn execute_query(plan: &QueryPlan, store: &Store) -> Result<QueryResult, QueryError> {
    let started = Instant::now();
    let (from, to) = plan.aligned_range;
    let id = plan.series_id.as_str();

    let (points, scanned, fetched, grid, bound) = match plan.path {
        QueryPath::Raw => {
            let raw = store.read_raw(id, from, to)?;
            match raw.value_extent() {
                None => (Vec::new(), 0, 0, None, 0.0),
                Some(extent) => {
                    let grid = plan.target.grid(extent)?;
                    let kept = rppf_points(raw.points(), &grid)?;
                    (kept, raw.len(), raw.len(), Some(grid), grid.diagonal())
                }
            }
        }
        QueryPath::Preprocessed => {
            let segments = store.read_segments(id, from, to)?;
            match segment_value_extent(&segments) {
                None => (Vec::new(), 0, 0, None, 0.0),
                Some(extent) => {
                    let grid = plan.target.grid(extent)?;
                    let out = filter_segments(&segments, &grid)?;
                    (
                        out.points,
                        out.raw_points_scanned,
                        out.points_fetched,
                        Some(grid),
                        out.distance_bound,
                    )
                }
            }
        }
    };

    Ok(QueryResult {
        meta: QueryMeta {
            path: plan.path,
            raw_points_scanned: scanned,
            points_fetched: fetched,
            points_returned: points.len(),
            target_grid: grid,
            distance_bound: bound,
            elapsed: started.elapsed(),
            aligned_from: from,
            aligned_to: to,
        },
        points: Series::from_sorted(points).with_id(id),
    })
}

/// Resolves and executes `params` in one step.
pub fn run_query(store: &Store, params: &QueryParams, options: &QueryOptions) -> Result<QueryResult, QueryError> {
    params.validate()?;
    let catalog = store.catalog_entry(&params.series_id)?;
    let plan = resolve_query(params, &catalog, options)?;
    execute_query(&plan, store)
}
