//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Point sets cross the JS boundary as flat `Float64Array`s of
//! `[t0, v0, t1, v1, ...]`. Each filter returns a [`Outcome`] with the kept
//! points, the measured directed Hausdorff distance to the input and the
//! bound that applies (NaN for Douglas-Peucker, which has none).

use thiserror::Error;
use wasm_bindgen::prelude::*;

use arppf_core::datasets::{generate, DatasetError, DatasetKind, DatasetSpec};
use arppf_core::preprocess::{preprocess_series, BatchConfig, PreprocessError, Segment};
use arppf_core::query::{filter_segments, segment_value_extent, TargetSpec};
use arppf_core::{
    directed_hausdorff, douglas_peucker, make_grid, rppf_filter, AxisScale, BucketGrid, DataPoint,
    GridError, MetricsError, Series, SeriesError,
};

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("point buffer length {0} is odd; expected [t0, v0, t1, v1, ...]")]
    OddLength(usize),
    #[error("no points to filter")]
    Empty,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    points: Vec<f64>,
    distance: f64,
    bound: f64,
    fetched: usize,
}

#[wasm_bindgen]
impl Outcome {
    /// Kept points, flattened.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn count(&self) -> usize {
        self.points.len() / 2
    }

    #[wasm_bindgen(getter)]
    pub fn distance(&self) -> f64 {
        self.distance
    }

    #[wasm_bindgen(getter)]
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Points read before the final filter (AR-PPF only; the input size otherwise).
    #[wasm_bindgen(getter)]
    pub fn fetched(&self) -> usize {
        self.fetched
    }
}

fn unflatten(flat: &[f64]) -> Result<Series, DemoError> {
    if flat.len() % 2 != 0 {
        return Err(DemoError::OddLength(flat.len()));
    }
    let points = flat.chunks_exact(2).map(|c| DataPoint::new(c[0], c[1])).collect();
    let series = Series::new(points)?;
    if series.is_empty() {
        return Err(DemoError::Empty);
    }
    Ok(series)
}

fn flatten(points: &[DataPoint]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.t, p.v]).collect()
}

/// Grid over the data extent; a single timestamp gets a unit-wide axis.
fn extent_grid(series: &Series, n_t: usize, n_v: usize) -> Result<BucketGrid, DemoError> {
    let (t0, t1) = series.time_extent().ok_or(DemoError::Empty)?;
    let v = series.value_extent().ok_or(DemoError::Empty)?;
    let t1 = if t1 > t0 { t1 } else { t0 + 1.0 };
    Ok(make_grid((t0, t1), v, n_t, n_v)?)
}

fn outcome(input: &Series, kept: &[DataPoint], bound: f64, fetched: usize) -> Result<Outcome, DemoError> {
    Ok(Outcome {
        distance: directed_hausdorff(input.points(), kept, AxisScale::UNIT)?,
        points: flatten(kept),
        bound,
        fetched,
    })
}

pub fn generate_points(kind: &str, n: usize, seed: u32) -> Result<Vec<f64>, DemoError> {
    let kind: DatasetKind = kind.parse()?;
    let series = generate(&DatasetSpec::new(kind, n, u64::from(seed)))?;
    Ok(flatten(series.points()))
}

pub fn rppf_points(flat: &[f64], n_t: usize, n_v: usize) -> Result<Outcome, DemoError> {
    let series = unflatten(flat)?;
    let grid = extent_grid(&series, n_t, n_v)?;
    let kept = rppf_filter(&series, &grid)?.retained;
    outcome(&series, kept.points(), grid.diagonal(), series.len())
}

pub fn dp_points(flat: &[f64], epsilon: f64) -> Result<Outcome, DemoError> {
    let series = unflatten(flat)?;
    let kept = douglas_peucker(&series, epsilon);
    outcome(&series, kept.points(), f64::NAN, series.len())
}

/// Batch preprocessing followed by the final filter through an
/// `n_t × n_v` grid over the batch-aligned extent.
pub fn arppf_points(
    flat: &[f64],
    t_pre: f64,
    passes: usize,
    n_v_pre: usize,
    n_t: usize,
    n_v: usize,
) -> Result<Outcome, DemoError> {
    let series = unflatten(flat)?;
    let config = BatchConfig::new(t_pre, passes, n_v_pre)?;
    let mut segments: Vec<Segment> = Vec::new();
    preprocess_series("demo", &series, &config, &mut segments)?;
    let target = TargetSpec {
        t_from: segments.first().map_or(0.0, |s| s.t_start),
        t_to: segments.last().map_or(1.0, |s| s.t_end),
        n_t,
        n_v,
    };
    let extent = segment_value_extent(&segments).ok_or(DemoError::Empty)?;
    let out = filter_segments(&segments, &target.grid(extent)?)?;
    outcome(&series, &out.points, out.distance_bound, out.points_fetched)
}

fn js(e: DemoError) -> JsError {
    JsError::new(&e.to_string())
}

/// `kind` is one of linear, periodic_01, periodic_10, uniform, normal.
#[wasm_bindgen(js_name = generateDataset)]
pub fn generate_dataset(kind: &str, n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    generate_points(kind, n, seed).map_err(js)
}

#[wasm_bindgen]
pub fn rppf(points: &[f64], n_t: usize, n_v: usize) -> Result<Outcome, JsError> {
    rppf_points(points, n_t, n_v).map_err(js)
}

#[wasm_bindgen(js_name = douglasPeucker)]
pub fn douglas_peucker_js(points: &[f64], epsilon: f64) -> Result<Outcome, JsError> {
    dp_points(points, epsilon).map_err(js)
}

#[wasm_bindgen]
pub fn arppf(
    points: &[f64],
    t_pre: f64,
    passes: usize,
    n_v_pre: usize,
    n_t: usize,
    n_v: usize,
) -> Result<Outcome, JsError> {
    arppf_points(points, t_pre, passes, n_v_pre, n_t, n_v).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_buffers_round_trip() {
        let flat = vec![0.0, 1.0, 2.0, 3.0];
        assert_eq!(flatten(unflatten(&flat).unwrap().points()), flat);
        assert!(matches!(unflatten(&[1.0]), Err(DemoError::OddLength(1))));
        assert!(matches!(unflatten(&[]), Err(DemoError::Empty)));
        assert!(matches!(unflatten(&[2.0, 0.0, 1.0, 0.0]), Err(DemoError::Series(_))));
    }

    #[test]
    fn single_point_inputs() {
        let one = [5.0, 5.0];
        assert_eq!(rppf_points(&one, 10, 10).unwrap().count(), 1);
        assert_eq!(dp_points(&one, 1.0).unwrap().count(), 1);
        assert_eq!(arppf_points(&one, 1.0, 2, 10, 10, 10).unwrap().count(), 1);
    }
}
