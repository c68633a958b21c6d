//! Timestamped scalar samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One sample: time coordinate `t` and value coordinate `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub t: f64,
    pub v: f64,
}

impl DataPoint {
    pub const fn new(t: f64, v: f64) -> Self {
        Self { t, v }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.v.is_finite()
    }
}

impl From<(f64, f64)> for DataPoint {
    fn from((t, v): (f64, f64)) -> Self {
        Self { t, v }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("non-finite sample at index {index}: ({t}, {v})")]
    NonFinite { index: usize, t: f64, v: f64 },
    #[error("timestamp regression at index {index}: {t} < {previous}")]
    Unsorted { index: usize, t: f64, previous: f64 },
}

/// An ordered sequence of finite samples, non-decreasing in `t`.
///
/// Ties in `t` are allowed and keep their input order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    id: Option<String>,
    points: Vec<DataPoint>,
}

impl Series {
    /// Validates finiteness and time ordering.
    pub fn new(points: Vec<DataPoint>) -> Result<Self, SeriesError> {
        validate(&points)?;
        Ok(Self { id: None, points })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    /// Builds a series from points already known to satisfy the invariants,
    /// such as a subsequence of another series.
    pub(crate) fn from_sorted(points: Vec<DataPoint>) -> Self {
        debug_assert!(validate(&points).is_ok());
        Self { id: None, points }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<DataPoint> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DataPoint> {
        self.points.iter()
    }

    pub fn first(&self) -> Option<&DataPoint> {
        self.points.first()
    }

    pub fn last(&self) -> Option<&DataPoint> {
        self.points.last()
    }

    /// `(min, max)` of the values, or `None` for an empty series.
    pub fn value_extent(&self) -> Option<(f64, f64)> {
        value_extent(&self.points)
    }

    /// `(first t, last t)`, or `None` for an empty series.
    pub fn time_extent(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.t, self.points.last()?.t))
    }
}

impl<'a> IntoIterator for &'a Series {
    type Item = &'a DataPoint;
    type IntoIter = std::slice::Iter<'a, DataPoint>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

impl TryFrom<Vec<(f64, f64)>> for Series {
    type Error = SeriesError;

    fn try_from(pairs: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Series::new(pairs.into_iter().map(DataPoint::from).collect())
    }
}

pub(crate) fn value_extent(points: &[DataPoint]) -> Option<(f64, f64)> {
    let first = points.first()?;
    Some(points.iter().fold((first.v, first.v), |(lo, hi), p| {
        (lo.min(p.v), hi.max(p.v))
    }))
}

fn validate(points: &[DataPoint]) -> Result<(), SeriesError> {
    let mut previous = f64::NEG_INFINITY;
    for (index, p) in points.iter().enumerate() {
        if !p.is_finite() {
            return Err(SeriesError::NonFinite {
                index,
                t: p.t,
                v: p.v,
            });
        }
        if p.t < previous {
            return Err(SeriesError::Unsorted {
                index,
                t: p.t,
                previous,
            });
        }
        previous = p.t;
    }
    Ok(())
}
