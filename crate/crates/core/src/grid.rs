//! The T×V pixel-bucket lattice laid over a chart.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::DataPoint;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("invalid range: time [{t_min}, {t_max}], value [{v_min}, {v_max}]")]
    InvalidRange {
        t_min: f64,
        t_max: f64,
        v_min: f64,
        v_max: f64,
    },
    #[error("bucket counts must be at least 1 (got {n_t}x{n_v})")]
    InvalidCount { n_t: usize, n_v: usize },
    #[error("point ({t}, {v}) lies outside the grid")]
    OutOfRange { t: f64, v: f64 },
}

/// A uniform bucket lattice of `n_t` time buckets by `n_v` value buckets.
///
/// A degenerate value range (`v_min == v_max`) collapses to a single value
/// bucket of height 0, so the diagonal equals the bucket width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketGrid {
    t_min: f64,
    t_max: f64,
    v_min: f64,
    v_max: f64,
    n_t: usize,
    n_v: usize,
}

impl BucketGrid {
    pub fn new(
        (t_min, t_max): (f64, f64),
        (v_min, v_max): (f64, f64),
        n_t: usize,
        n_v: usize,
    ) -> Result<Self, GridError> {
        let finite = [t_min, t_max, v_min, v_max].iter().all(|x| x.is_finite());
        if !finite || t_max <= t_min || v_max < v_min {
            return Err(GridError::InvalidRange {
                t_min,
                t_max,
                v_min,
                v_max,
            });
        }
        if n_t == 0 || n_v == 0 {
            return Err(GridError::InvalidCount { n_t, n_v });
        }
        let n_v = if v_max == v_min { 1 } else { n_v };
        Ok(Self {
            t_min,
            t_max,
            v_min,
            v_max,
            n_t,
            n_v,
        })
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t_min, self.t_max)
    }

    pub fn v_range(&self) -> (f64, f64) {
        (self.v_min, self.v_max)
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn bucket_count(&self) -> usize {
        self.n_t.saturating_mul(self.n_v)
    }

    /// Bucket width `T`.
    pub fn bucket_width(&self) -> f64 {
        (self.t_max - self.t_min) / self.n_t as f64
    }

    /// Bucket height `V`; 0 for a degenerate value range.
    pub fn bucket_height(&self) -> f64 {
        (self.v_max - self.v_min) / self.n_v as f64
    }

    /// Bucket diagonal `D = sqrt(T² + V²)`, the largest distance between two
    /// points sharing a bucket.
    pub fn diagonal(&self) -> f64 {
        self.bucket_width().hypot(self.bucket_height())
    }

    pub fn contains(&self, p: &DataPoint) -> bool {
        p.t >= self.t_min && p.t <= self.t_max && p.v >= self.v_min && p.v <= self.v_max
    }

    /// `(i, j)` bucket coordinates of `p`; points on the upper boundary fall
    /// into the last bucket.
    pub fn bucket_index(&self, p: &DataPoint) -> Result<(usize, usize), GridError> {
        if !self.contains(p) {
            return Err(GridError::OutOfRange { t: p.t, v: p.v });
        }
        Ok(self.bucket_index_unchecked(p))
    }

    #[inline]
    pub(crate) fn bucket_index_unchecked(&self, p: &DataPoint) -> (usize, usize) {
        let i = axis_index(p.t - self.t_min, self.bucket_width(), self.n_t);
        let j = if self.v_max == self.v_min {
            0
        } else {
            axis_index(p.v - self.v_min, self.bucket_height(), self.n_v)
        };
        (i, j)
    }
}

#[inline]
fn axis_index(offset: f64, size: f64, count: usize) -> usize {
    let k = (offset / size).floor();
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(count - 1)
    }
}

/// Convenience constructor mirroring [`BucketGrid::new`].
pub fn make_grid(
    t_range: (f64, f64),
    v_range: (f64, f64),
    n_t: usize,
    n_v: usize,
) -> Result<BucketGrid, GridError> {
    BucketGrid::new(t_range, v_range, n_t, n_v)
}
