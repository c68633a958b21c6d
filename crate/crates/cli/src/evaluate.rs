//! The dataset × algorithm matrix: Douglas-Peucker at two tolerances, the
//! one-shot bucket filter, and the two-tier pipeline at several pass counts.

use rayon::prelude::*;

use arppf_core::datasets::{generate, DatasetError, DatasetKind, DatasetSpec, RNG_ALGORITHM, VALUE_MAX};
use arppf_core::preprocess::{preprocess_series, BatchConfig, PreprocessError, Segment};
use arppf_core::query::{filter_segments, segment_value_extent, TargetSpec};
use arppf_core::{
    directed_hausdorff, douglas_peucker, make_grid, rppf_filter, AxisScale, DataPoint, GridError,
    MetricsError,
};
use thiserror::Error;

use crate::report::{DistanceRow, ExperimentReport, FetchRow, GridInfo, MemoryRow};

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateConfig {
    pub n: usize,
    pub seed: u64,
    pub n_t: usize,
    pub n_v: usize,
    pub t_pre: f64,
    pub n_v_pre: usize,
    pub epsilons: Vec<f64>,
    pub pass_configs: Vec<usize>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            n: 100_000,
            seed: 42,
            n_t: 300,
            n_v: 100,
            t_pre: 1.0,
            n_v_pre: 100,
            epsilons: vec![1.4, 0.7],
            pass_configs: vec![1, 5],
        }
    }
}

struct DatasetOutcome {
    distances: Vec<DistanceRow>,
    fetch_counts: Vec<FetchRow>,
    memory: Vec<MemoryRow>,
}

fn bounded(distance: f64, bound: f64) -> bool {
    distance <= bound * (1.0 + 1e-9)
}

fn distance_row(
    kind: DatasetKind,
    algorithm: String,
    input: &[DataPoint],
    output: &[DataPoint],
    bound: Option<f64>,
) -> Result<DistanceRow, EvaluateError> {
    let distance = directed_hausdorff(input, output, AxisScale::UNIT)?;
    Ok(DistanceRow {
        dataset: kind.name().to_string(),
        algorithm,
        input_points: input.len(),
        output_points: output.len(),
        distance,
        bound,
        within_bound: bound.map(|b| bounded(distance, b)),
    })
}

fn evaluate_dataset(kind: DatasetKind, cfg: &EvaluateConfig) -> Result<DatasetOutcome, EvaluateError> {
    let t_extent = DatasetSpec::DEFAULT_T_EXTENT;
    let series = generate(&DatasetSpec::new(kind, cfg.n, cfg.seed))?;
    let mut out = DatasetOutcome {
        distances: Vec::new(),
        fetch_counts: Vec::new(),
        memory: Vec::new(),
    };
    if series.is_empty() {
        return Ok(out);
    }
    let raw = series.points();

    for &eps in &cfg.epsilons {
        let kept = douglas_peucker(&series, eps);
        out.distances
            .push(distance_row(kind, format!("dp_eps_{eps}"), raw, kept.points(), None)?);
    }

    let chart = make_grid((0.0, t_extent), (0.0, VALUE_MAX), cfg.n_t, cfg.n_v)?;
    let kept = rppf_filter(&series, &chart)?;
    out.distances.push(distance_row(
        kind,
        "rppf".into(),
        raw,
        kept.retained.points(),
        Some(chart.diagonal()),
    )?);

    for &passes in &cfg.pass_configs {
        let config = BatchConfig::new(cfg.t_pre, passes, cfg.n_v_pre)?;
        let mut segments: Vec<Segment> = Vec::new();
        let report = preprocess_series(kind.name(), &series, &config, &mut segments)?;

        let target = TargetSpec {
            t_from: 0.0,
            t_to: t_extent,
            n_t: cfg.n_t,
            n_v: cfg.n_v,
        };
        let extent = segment_value_extent(&segments).expect("series is not empty");
        let result = filter_segments(&segments, &target.grid(extent)?)?;
        out.distances.push(distance_row(
            kind,
            format!("arppf_{passes}pass"),
            raw,
            &result.points,
            Some(result.distance_bound),
        )?);

        let fetch_bound = report.segment_count * cfg.n_v_pre;
        out.fetch_counts.push(FetchRow {
            dataset: kind.name().to_string(),
            passes,
            original_points: series.len(),
            points_fetched: result.points_fetched,
            points_returned: result.points.len(),
            fetch_ratio: result.points_fetched as f64 / series.len() as f64,
            bound: fetch_bound,
            within_bound: result.points_fetched <= fetch_bound,
        });

        // Per-batch comparison: a pass peak may only be checked against the
        // bound of its own batch.
        let worst_batch_ok = |pass: usize| {
            report.segments.iter().all(|s| {
                s.per_pass_peak
                    .get(pass)
                    .is_none_or(|&p| p <= s.raw_count.div_ceil(passes) + cfg.n_v_pre)
            })
        };
        for (i, &peak) in report.per_pass_peak_max.iter().enumerate() {
            out.memory.push(MemoryRow {
                dataset: kind.name().to_string(),
                passes,
                pass: i + 1,
                peak,
                bound: report.max_memory_bound,
                within_bound: peak <= report.max_memory_bound && worst_batch_ok(i),
            });
        }
    }
    Ok(out)
}

/// Runs the full matrix over every dataset kind. Datasets are evaluated in
/// parallel; rows come out in [`DatasetKind::ALL`] order.
pub fn run(cfg: &EvaluateConfig) -> Result<ExperimentReport, EvaluateError> {
    let outcomes: Vec<DatasetOutcome> = DatasetKind::ALL
        .par_iter()
        .map(|&kind| evaluate_dataset(kind, cfg))
        .collect::<Result<_, _>>()?;

    let chart = make_grid(
        (0.0, DatasetSpec::DEFAULT_T_EXTENT),
        (0.0, VALUE_MAX),
        cfg.n_t,
        cfg.n_v,
    )?;
    let mut report = ExperimentReport {
        rng_algorithm: RNG_ALGORITHM.to_string(),
        seed: cfg.seed,
        points_per_dataset: cfg.n,
        t_pre: cfg.t_pre,
        n_v_pre: cfg.n_v_pre,
        grid: GridInfo {
            n_t: cfg.n_t,
            n_v: cfg.n_v,
            t_extent: DatasetSpec::DEFAULT_T_EXTENT,
            v_extent: VALUE_MAX,
            diagonal: chart.diagonal(),
        },
        distances: Vec::new(),
        fetch_counts: Vec::new(),
        memory: Vec::new(),
        violations: 0,
    };
    for o in outcomes {
        report.distances.extend(o.distances);
        report.fetch_counts.extend(o.fetch_counts);
        report.memory.extend(o.memory);
    }
    report.violations = report.count_violations();
    Ok(report)
}
