//! Timing comparison of the two query paths over the same range.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use arppf_core::preprocess::{batch_index_of, BatchConfig, PreprocessError};
use arppf_core::query::{run_query, QueryError, QueryMode, QueryOptions, QueryParams, QueryPath};
use arppf_core::store::{Store, StoreError};
use arppf_core::Series;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("series {0:?} has no preprocessed segments")]
    MissingPreprocessing(String),
    #[error("repeat must be at least 1")]
    NoRepeats,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub t_pre: f64,
    pub passes: usize,
    pub n_v_pre: usize,
    pub repeat: usize,
    pub buckets_t: usize,
    pub buckets_v: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            t_pre: 1.0,
            passes: 1,
            n_v_pre: 100,
            repeat: 10,
            buckets_t: 300,
            buckets_v: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTiming {
    pub path: QueryPath,
    pub median_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub samples_ms: Vec<f64>,
    pub points_fetched: usize,
    pub points_returned: usize,
    pub distance_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub series_id: String,
    pub raw_points: usize,
    pub t_from: f64,
    pub t_to: f64,
    pub preprocess_ms: Option<f64>,
    pub raw: PathTiming,
    pub preprocessed: PathTiming,
    /// Raw median over preprocessed median.
    pub speedup: f64,
    /// Points fetched by the preprocessed path over points fetched by the raw path.
    pub fetched_ratio: f64,
}

pub fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => s[n / 2],
        _ => (s[n / 2 - 1] + s[n / 2]) / 2.0,
    }
}

fn timing(path: QueryPath, samples: Vec<f64>, fetched: usize, returned: usize, bound: f64) -> PathTiming {
    PathTiming {
        path,
        median_ms: median(&samples),
        min_ms: samples.iter().copied().fold(f64::INFINITY, f64::min),
        max_ms: samples.iter().copied().fold(0.0, f64::max),
        samples_ms: samples,
        points_fetched: fetched,
        points_returned: returned,
        distance_bound: bound,
    }
}

/// Times both paths over the batch-aligned full extent of an already
/// preprocessed series.
///
/// Each repeat runs both paths back to back, alternating which goes first.
pub fn bench_store(store: &Store, series_id: &str, cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    if cfg.repeat == 0 {
        return Err(BenchError::NoRepeats);
    }
    let entry = store.catalog_entry(series_id)?;
    let (Some(pre), Some(t_min), Some(t_max)) = (entry.preprocess_config, entry.t_min, entry.t_max) else {
        return Err(BenchError::MissingPreprocessing(series_id.to_string()));
    };
    if entry.segment_count == 0 {
        return Err(BenchError::MissingPreprocessing(series_id.to_string()));
    }
    let t_from = batch_index_of(t_min, pre.t_pre) as f64 * pre.t_pre;
    let t_to = (batch_index_of(t_max, pre.t_pre) + 1) as f64 * pre.t_pre;
    let params = |mode| {
        QueryParams::new(series_id, t_from, t_to)
            .buckets(cfg.buckets_t, cfg.buckets_v)
            .mode(mode)
    };
    let raw_q = params(QueryMode::Raw);
    let pre_q = params(QueryMode::Preprocessed);
    let options = QueryOptions::default();

    // Warm-up, and the point counts, which do not change between repeats.
    let raw_res = run_query(store, &raw_q, &options)?;
    let pre_res = run_query(store, &pre_q, &options)?;

    let mut raw_ms = Vec::with_capacity(cfg.repeat);
    let mut pre_ms = Vec::with_capacity(cfg.repeat);
    let time = |q: &QueryParams| -> Result<f64, BenchError> {
        let start = Instant::now();
        run_query(store, q, &options)?;
        Ok(start.elapsed().as_secs_f64() * 1e3)
    };
    for i in 0..cfg.repeat {
        if i % 2 == 0 {
            raw_ms.push(time(&raw_q)?);
            pre_ms.push(time(&pre_q)?);
        } else {
            pre_ms.push(time(&pre_q)?);
            raw_ms.push(time(&raw_q)?);
        }
    }

    let raw = timing(
        QueryPath::Raw,
        raw_ms,
        raw_res.meta.points_fetched,
        raw_res.meta.points_returned,
        raw_res.meta.distance_bound,
    );
    let preprocessed = timing(
        QueryPath::Preprocessed,
        pre_ms,
        pre_res.meta.points_fetched,
        pre_res.meta.points_returned,
        pre_res.meta.distance_bound,
    );
    Ok(BenchReport {
        series_id: series_id.to_string(),
        raw_points: entry.raw_count,
        t_from,
        t_to,
        preprocess_ms: None,
        speedup: raw.median_ms / preprocessed.median_ms,
        fetched_ratio: preprocessed.points_fetched as f64 / raw.points_fetched.max(1) as f64,
        raw,
        preprocessed,
    })
}

/// Loads `series` into a scratch store, preprocesses it and benchmarks it.
pub fn bench_series(series: &Series, cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    let config = BatchConfig::new(cfg.t_pre, cfg.passes, cfg.n_v_pre)?;
    let dir = tempfile::tempdir()?;
    let store = Store::open(dir.path())?;
    let id = series.id().unwrap_or("bench");
    store.append(id, series)?;
    let start = Instant::now();
    store.preprocess(id, &config).map_err(|e| match e {
        StoreError::NoData(id) => BenchError::MissingPreprocessing(id),
        other => other.into(),
    })?;
    let preprocess_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut report = bench_store(&store, id, cfg)?;
    report.preprocess_ms = Some(preprocess_ms);
    Ok(report)
}
