//! Batch preprocessing: the series is cut into `t_pre`-wide batches aligned to
//! multiples of `t_pre`, and each batch is reduced by a multi-pass bucket
//! filter with one time bucket and `n_v_pre` value buckets.
//!
//! A batch of `raw_count` points is split into `passes` chunks of
//! `ceil(raw_count / passes)` points. Pass `i` filters the points retained by
//! pass `i - 1` together with chunk `i`, so at most
//! `ceil(raw_count / passes) + n_v_pre` points are live at any time. The
//! value extent used for each pass's grid is the running min/max over every
//! raw point seen so far. Each pass contributes its bucket diagonal `D_i` to
//! the segment's distance bound `Σ D_i`.

use std::convert::Infallible;
use std::error::Error as StdError;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::rppf_points;
use crate::grid::{make_grid, GridError};
use crate::metrics::chained_bound;
use crate::series::{value_extent, DataPoint, Series};

type BoxError = Box<dyn StdError + Send + Sync>;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("invalid batch configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid time range [{t_from}, {t_to})")]
    InvalidRange { t_from: f64, t_to: f64 },
    #[error("point at t={t} lies outside batch [{t_start}, {t_end})")]
    PointOutsideBatch { t: f64, t_start: f64, t_end: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("reading raw data failed: {0}")]
    Source(#[source] BoxError),
    #[error("writing segment for batch {batch_index} failed: {source}")]
    Sink {
        batch_index: i64,
        #[source]
        source: BoxError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub t_pre: f64,
    pub passes: usize,
    pub n_v_pre: usize,
}

impl BatchConfig {
    pub fn new(t_pre: f64, passes: usize, n_v_pre: usize) -> Result<Self, PreprocessError> {
        let config = Self {
            t_pre,
            passes,
            n_v_pre,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.t_pre.is_finite() && self.t_pre > 0.0) {
            return Err(PreprocessError::InvalidConfig(format!(
                "t_pre must be positive (got {})",
                self.t_pre
            )));
        }
        if self.passes == 0 {
            return Err(PreprocessError::InvalidConfig("passes must be at least 1".into()));
        }
        if self.n_v_pre == 0 {
            return Err(PreprocessError::InvalidConfig("n_v must be at least 1".into()));
        }
        Ok(())
    }
}

/// One batch: `[t_start, t_end)` with `t_start = index · t_pre`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchInterval {
    pub index: i64,
    pub t_start: f64,
    pub t_end: f64,
}

impl BatchInterval {
    pub fn new(index: i64, t_pre: f64) -> Self {
        Self {
            index,
            t_start: index as f64 * t_pre,
            t_end: (index + 1) as f64 * t_pre,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }
}

/// Index of the batch whose half-open interval holds `t`.
pub fn batch_index_of(t: f64, t_pre: f64) -> i64 {
    let mut k = (t / t_pre).floor() as i64;
    while BatchInterval::new(k, t_pre).t_start > t {
        k -= 1;
    }
    while BatchInterval::new(k, t_pre).t_end <= t {
        k += 1;
    }
    k
}

/// Batches covering `[t_from, t_to)`, expanded outward to `t_pre` multiples.
pub fn plan_batches(t_from: f64, t_to: f64, t_pre: f64) -> Result<Vec<BatchInterval>, PreprocessError> {
    if !(t_from.is_finite() && t_to.is_finite() && t_to > t_from) {
        return Err(PreprocessError::InvalidRange { t_from, t_to });
    }
    if !(t_pre.is_finite() && t_pre > 0.0) {
        return Err(PreprocessError::InvalidConfig(format!(
            "t_pre must be positive (got {t_pre})"
        )));
    }
    let first = batch_index_of(t_from, t_pre);
    // The last batch is the one holding the greatest t strictly below t_to.
    let mut last = batch_index_of(t_to, t_pre);
    if BatchInterval::new(last, t_pre).t_start >= t_to {
        last -= 1;
    }
    Ok((first..=last).map(|k| BatchInterval::new(k, t_pre)).collect())
}

/// Persisted output of one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub series_id: String,
    pub batch_index: i64,
    pub t_start: f64,
    pub t_end: f64,
    /// Exact extremes over all raw points of the batch (0 when empty).
    pub v_min: f64,
    pub v_max: f64,
    pub passes_used: usize,
    pub retained: Vec<DataPoint>,
    pub raw_count: usize,
    pub pass_diagonals: Vec<f64>,
}

impl Segment {
    /// `Σ D_i` over the passes, bounding the distance from the batch's raw
    /// points to `retained`.
    pub fn distance_bound(&self) -> f64 {
        chained_bound(&self.pass_diagonals)
    }

    pub fn is_empty(&self) -> bool {
        self.raw_count == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryStats {
    /// Live point count at each pass: chunk size plus points carried over.
    pub per_pass_peak: Vec<usize>,
    /// `ceil(raw_count / passes) + n_v_pre`
    pub bound_per_pass: usize,
}

/// Runs the multi-pass filter over the points of one batch.
pub fn run_batch(
    series: &Series,
    interval: &BatchInterval,
    config: &BatchConfig,
) -> Result<(Segment, MemoryStats), PreprocessError> {
    run_batch_points(series.id().unwrap_or_default(), series.points(), interval, config)
}

pub(crate) fn run_batch_points(
    series_id: &str,
    points: &[DataPoint],
    interval: &BatchInterval,
    config: &BatchConfig,
) -> Result<(Segment, MemoryStats), PreprocessError> {
    config.validate()?;
    if let Some(p) = points.iter().find(|p| !interval.contains(p.t)) {
        return Err(PreprocessError::PointOutsideBatch {
            t: p.t,
            t_start: interval.t_start,
            t_end: interval.t_end,
        });
    }

    let raw_count = points.len();
    let chunk_len = raw_count.div_ceil(config.passes).max(1);
    let mut segment = Segment {
        series_id: series_id.to_string(),
        batch_index: interval.index,
        t_start: interval.t_start,
        t_end: interval.t_end,
        v_min: 0.0,
        v_max: 0.0,
        passes_used: 0,
        retained: Vec::new(),
        raw_count,
        pass_diagonals: Vec::new(),
    };
    let mut stats = MemoryStats {
        per_pass_peak: Vec::new(),
        bound_per_pass: raw_count.div_ceil(config.passes) + config.n_v_pre,
    };
    let Some((v_min, v_max)) = value_extent(points) else {
        return Ok((segment, stats));
    };
    // Running extent over the raw points of chunks 1..=i.
    let mut extent_seen: Option<(f64, f64)> = None;

    for chunk in points.chunks(chunk_len) {
        let (lo, hi) = value_extent(chunk).expect("chunks are non-empty");
        let (lo, hi) = match extent_seen {
            Some((a, b)) => (a.min(lo), b.max(hi)),
            None => (lo, hi),
        };
        extent_seen = Some((lo, hi));

        stats.per_pass_peak.push(segment.retained.len() + chunk.len());
        let mut working = std::mem::take(&mut segment.retained);
        working.extend_from_slice(chunk);
        let grid = make_grid((interval.t_start, interval.t_end), (lo, hi), 1, config.n_v_pre)?;
        segment.retained = rppf_points(&working, &grid)?;
        segment.pass_diagonals.push(grid.diagonal());
        segment.passes_used += 1;
    }
    segment.v_min = v_min;
    segment.v_max = v_max;
    Ok((segment, stats))
}

/// Read access to a time-ordered raw series.
pub trait RawSource {
    type Error: StdError + Send + Sync + 'static;

    /// `(first t, last t)`, or `None` when there is no data.
    fn extent(&self) -> Result<Option<(f64, f64)>, Self::Error>;

    /// Points with `t_from <= t < t_to`, in time order.
    fn read_range(&self, t_from: f64, t_to: f64) -> Result<Vec<DataPoint>, Self::Error>;
}

impl RawSource for Series {
    type Error = Infallible;

    fn extent(&self) -> Result<Option<(f64, f64)>, Infallible> {
        Ok(self.time_extent())
    }

    fn read_range(&self, t_from: f64, t_to: f64) -> Result<Vec<DataPoint>, Infallible> {
        let pts = self.points();
        let lo = pts.partition_point(|p| p.t < t_from);
        let hi = pts.partition_point(|p| p.t < t_to);
        Ok(pts[lo..hi.max(lo)].to_vec())
    }
}

/// Destination for finished segments.
pub trait SegmentSink {
    type Error: StdError + Send + Sync + 'static;

    fn write_segment(&mut self, segment: &Segment) -> Result<(), Self::Error>;
}

impl SegmentSink for Vec<Segment> {
    type Error = Infallible;

    fn write_segment(&mut self, segment: &Segment) -> Result<(), Infallible> {
        self.push(segment.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub batch_index: i64,
    pub t_start: f64,
    pub raw_count: usize,
    pub retained_count: usize,
    pub per_pass_peak: Vec<usize>,
    pub distance_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub series_id: String,
    pub config: BatchConfig,
    pub raw_total: usize,
    pub retained_total: usize,
    pub retention_ratio: f64,
    pub segment_count: usize,
    /// Largest live point count seen in any pass of any batch.
    pub max_per_pass_memory: usize,
    /// Largest `ceil(raw_count / passes) + n_v_pre` over the batches.
    pub max_memory_bound: usize,
    /// For each pass index, the largest peak across batches.
    pub per_pass_peak_max: Vec<usize>,
    /// Largest per-segment `Σ D_i`.
    pub max_distance_bound: f64,
    pub segments: Vec<SegmentSummary>,
}

impl PreprocessReport {
    fn empty(series_id: &str, config: BatchConfig) -> Self {
        Self {
            series_id: series_id.to_string(),
            config,
            raw_total: 0,
            retained_total: 0,
            retention_ratio: 0.0,
            segment_count: 0,
            max_per_pass_memory: 0,
            max_memory_bound: 0,
            per_pass_peak_max: Vec::new(),
            max_distance_bound: 0.0,
            segments: Vec::new(),
        }
    }
}

/// Preprocesses the whole extent of `source`, writing one segment per
/// non-empty batch into `sink`.
pub fn preprocess_series<R, S>(
    series_id: &str,
    source: &R,
    config: &BatchConfig,
    sink: &mut S,
) -> Result<PreprocessReport, PreprocessError>
where
    R: RawSource + ?Sized,
    S: SegmentSink + ?Sized,
{
    config.validate()?;
    let mut report = PreprocessReport::empty(series_id, *config);
    let Some((t_min, t_max)) = source
        .extent()
        .map_err(|e| PreprocessError::Source(Box::new(e)))?
    else {
        return Ok(report);
    };

    let first = batch_index_of(t_min, config.t_pre);
    let last = batch_index_of(t_max, config.t_pre);
    for k in first..=last {
        let interval = BatchInterval::new(k, config.t_pre);
        let points = source
            .read_range(interval.t_start, interval.t_end)
            .map_err(|e| PreprocessError::Source(Box::new(e)))?;
        if points.is_empty() {
            continue;
        }
        let (segment, stats) = run_batch_points(series_id, &points, &interval, config)?;
        sink.write_segment(&segment)
            .map_err(|e| PreprocessError::Sink {
                batch_index: k,
                source: Box::new(e),
            })?;

        report.raw_total += segment.raw_count;
        report.retained_total += segment.retained.len();
        report.segment_count += 1;
        report.max_memory_bound = report.max_memory_bound.max(stats.bound_per_pass);
        for (i, &peak) in stats.per_pass_peak.iter().enumerate() {
            report.max_per_pass_memory = report.max_per_pass_memory.max(peak);
            match report.per_pass_peak_max.get_mut(i) {
                Some(m) => *m = (*m).max(peak),
                None => report.per_pass_peak_max.push(peak),
            }
        }
        let bound = segment.distance_bound();
        report.max_distance_bound = report.max_distance_bound.max(bound);
        report.segments.push(SegmentSummary {
            batch_index: k,
            t_start: interval.t_start,
            raw_count: segment.raw_count,
            retained_count: segment.retained.len(),
            per_pass_peak: stats.per_pass_peak,
            distance_bound: bound,
        });
    }
    if report.raw_total > 0 {
        report.retention_ratio = report.retained_total as f64 / report.raw_total as f64;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::rppf_filter;
    use crate::metrics::{directed_hausdorff_brute, AxisScale};
    use proptest::prelude::*;

    fn starts(v: &[BatchInterval]) -> Vec<(f64, f64)> {
        v.iter().map(|b| (b.t_start, b.t_end)).collect()
    }

    #[test]
    fn plan_examples() {
        assert_eq!(
            starts(&plan_batches(0.0, 3.0, 1.0).unwrap()),
            vec![(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]
        );
        assert_eq!(
            starts(&plan_batches(0.5, 1.5, 1.0).unwrap()),
            vec![(0.0, 1.0), (1.0, 2.0)]
        );
        assert_eq!(plan_batches(0.0, 300.0, 1.0).unwrap().len(), 300);
        assert!(plan_batches(1.0, 1.0, 1.0).is_err());
        assert!(plan_batches(0.0, 1.0, 0.0).is_err());
        let neg = plan_batches(-2.5, -0.5, 1.0).unwrap();
        assert_eq!(neg.first().unwrap().index, -3);
        assert_eq!(neg.last().unwrap().index, -1);
    }

    #[test]
    fn config_validation() {
        assert!(BatchConfig::new(1.0, 0, 100).is_err());
        assert!(BatchConfig::new(1.0, 1, 0).is_err());
        assert!(BatchConfig::new(0.0, 1, 1).is_err());
        assert!(BatchConfig::new(f64::NAN, 1, 1).is_err());
        assert!(BatchConfig::new(0.5, 3, 10).is_ok());
    }

    fn batch_points(n: usize, t_pre: f64, f: impl Fn(usize) -> f64) -> Series {
        Series::new(
            (0..n)
                .map(|i| DataPoint::new(i as f64 * t_pre / n as f64, f(i)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn one_pass_matches_direct_filter() {
        let s = batch_points(334, 1.0, |i| ((i * 7919) % 1000) as f64 / 10.0);
        let cfg = BatchConfig::new(1.0, 1, 100).unwrap();
        let (seg, stats) = run_batch(&s, &BatchInterval::new(0, 1.0), &cfg).unwrap();
        let (lo, hi) = s.value_extent().unwrap();
        let grid = make_grid((0.0, 1.0), (lo, hi), 1, 100).unwrap();
        assert_eq!(seg.retained, rppf_filter(&s, &grid).unwrap().retained.into_points());
        assert_eq!(stats.per_pass_peak, vec![334]);
        assert_eq!(seg.pass_diagonals, vec![grid.diagonal()]);
    }

    #[test]
    fn memory_bound_worked_examples() {
        let s = batch_points(1800, 1800.0, |i| ((i * 131) % 997) as f64);
        let cfg = BatchConfig::new(1800.0, 6, 200).unwrap();
        let (seg, stats) = run_batch(&s, &BatchInterval::new(0, 1800.0), &cfg).unwrap();
        assert_eq!(stats.bound_per_pass, 500);
        assert_eq!(stats.per_pass_peak.len(), 6);
        assert!(stats.per_pass_peak.iter().all(|&p| p <= 500));
        assert!(seg.retained.len() <= 200);

        let s = batch_points(334, 1.0, |i| ((i * 37) % 100) as f64);
        let cfg = BatchConfig::new(1.0, 5, 100).unwrap();
        let (_, stats) = run_batch(&s, &BatchInterval::new(0, 1.0), &cfg).unwrap();
        assert_eq!(stats.bound_per_pass, 167);
        assert!(stats.per_pass_peak.iter().all(|&p| p <= 167));
        assert_eq!(stats.per_pass_peak[0], 67);
    }

    #[test]
    fn empty_batch_and_outside_points() {
        let cfg = BatchConfig::new(1.0, 3, 10).unwrap();
        let (seg, stats) = run_batch(&Series::empty(), &BatchInterval::new(4, 1.0), &cfg).unwrap();
        assert!(seg.retained.is_empty());
        assert_eq!(seg.raw_count, 0);
        assert_eq!(seg.passes_used, 0);
        assert!(stats.per_pass_peak.is_empty());

        let s = Series::try_from(vec![(0.5, 1.0), (1.0, 2.0)]).unwrap();
        assert!(matches!(
            run_batch(&s, &BatchInterval::new(0, 1.0), &cfg),
            Err(PreprocessError::PointOutsideBatch { .. })
        ));
    }

    #[test]
    fn fewer_points_than_passes() {
        let s = Series::try_from(vec![(0.1, 1.0), (0.2, 5.0)]).unwrap();
        let cfg = BatchConfig::new(1.0, 5, 10).unwrap();
        let (seg, stats) = run_batch(&s, &BatchInterval::new(0, 1.0), &cfg).unwrap();
        assert_eq!(seg.passes_used, 2);
        assert_eq!(stats.per_pass_peak, vec![1, 2]);
        assert_eq!(seg.retained.len(), 2);
    }

    #[test]
    fn preprocess_series_collects_report() {
        let s = batch_points(3000, 3.0, |i| (i % 50) as f64);
        let cfg = BatchConfig::new(1.0, 2, 20).unwrap();
        let mut sink: Vec<Segment> = Vec::new();
        let report = preprocess_series("s", &s, &cfg, &mut sink).unwrap();
        assert_eq!(report.segment_count, 3);
        assert_eq!(sink.len(), 3);
        assert_eq!(report.raw_total, 3000);
        assert_eq!(
            report.retained_total,
            sink.iter().map(|s| s.retained.len()).sum::<usize>()
        );
        assert!(report.max_per_pass_memory <= report.max_memory_bound);
        assert_eq!(report.per_pass_peak_max.len(), 2);

        let empty = preprocess_series("e", &Series::empty(), &cfg, &mut sink).unwrap();
        assert_eq!(empty.raw_total, 0);
        assert_eq!(empty.segment_count, 0);
        assert_eq!(empty.retention_ratio, 0.0);
    }

    #[derive(Debug)]
    struct FailingSink;

    #[derive(Debug, thiserror::Error)]
    #[error("disk full")]
    struct DiskFull;

    impl SegmentSink for FailingSink {
        type Error = DiskFull;
        fn write_segment(&mut self, _: &Segment) -> Result<(), DiskFull> {
            Err(DiskFull)
        }
    }

    #[test]
    fn sink_failure_carries_batch_index() {
        let s = Series::try_from(vec![(2.5, 1.0)]).unwrap();
        let cfg = BatchConfig::new(1.0, 1, 10).unwrap();
        let err = preprocess_series("s", &s, &cfg, &mut FailingSink).unwrap_err();
        assert!(matches!(err, PreprocessError::Sink { batch_index: 2, .. }));
    }

    fn arb_batch() -> impl Strategy<Value = (Vec<DataPoint>, BatchConfig)> {
        (
            prop::collection::vec((0.0..1.0f64, -30.0..70.0f64), 1..300),
            1usize..8,
            1usize..40,
        )
            .prop_map(|(mut raw, passes, n_v)| {
                raw.sort_by(|a, b| a.0.total_cmp(&b.0));
                let pts = raw.into_iter().map(DataPoint::from).collect();
                (pts, BatchConfig::new(1.0, passes, n_v).unwrap())
            })
    }

    proptest! {
        #[test]
        fn batch_invariants((pts, cfg) in arb_batch()) {
            let interval = BatchInterval::new(0, 1.0);
            let (seg, stats) = run_batch_points("p", &pts, &interval, &cfg).unwrap();
            prop_assert!(seg.retained.len() <= cfg.n_v_pre);
            prop_assert!(stats.per_pass_peak.iter().all(|&p| p <= stats.bound_per_pass));
            let (lo, hi) = value_extent(&pts).unwrap();
            prop_assert_eq!((seg.v_min, seg.v_max), (lo, hi));
            let h = directed_hausdorff_brute(&pts, &seg.retained, AxisScale::UNIT).unwrap();
            prop_assert!(h <= seg.distance_bound() * (1.0 + 1e-9));
            let mut it = pts.iter();
            for p in &seg.retained {
                prop_assert!(it.any(|q| q == p));
            }
        }
    }
}
