//! Pixel-bucket preemption: the first point to land in a bucket claims it and
//! every later point in that bucket is dropped.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::grid::{BucketGrid, GridError};
use crate::series::{DataPoint, Series};

/// Above this many cells the occupancy map switches from a dense bitset to a
/// hash set.
pub const DENSE_OCCUPANCY_LIMIT: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub retained: Series,
    pub occupied_buckets: usize,
    pub input_count: usize,
}

enum Occupancy {
    Dense(Vec<u64>),
    Sparse(HashSet<usize>),
}

impl Occupancy {
    fn for_grid(grid: &BucketGrid) -> Self {
        let cells = grid.bucket_count();
        if cells <= DENSE_OCCUPANCY_LIMIT {
            Occupancy::Dense(vec![0; cells.div_ceil(64)])
        } else {
            Occupancy::Sparse(HashSet::new())
        }
    }

    /// Marks `cell` occupied; returns true if it was free.
    #[inline]
    fn claim(&mut self, cell: usize) -> bool {
        match self {
            Occupancy::Dense(words) => {
                let (w, bit) = (cell / 64, 1u64 << (cell % 64));
                let free = words[w] & bit == 0;
                words[w] |= bit;
                free
            }
            Occupancy::Sparse(set) => set.insert(cell),
        }
    }
}

/// Filters `series` through `grid`, keeping the first point seen in each
/// bucket.
///
/// Every point must lie inside the grid; otherwise the whole call fails.
pub fn rppf_filter(series: &Series, grid: &BucketGrid) -> Result<FilterResult, GridError> {
    let retained = rppf_points(series.points(), grid)?;
    Ok(FilterResult {
        occupied_buckets: retained.len(),
        input_count: series.len(),
        retained: Series::from_sorted(retained),
    })
}

/// Slice form of [`rppf_filter`]; the output preserves input order.
pub fn rppf_points(points: &[DataPoint], grid: &BucketGrid) -> Result<Vec<DataPoint>, GridError> {
    if let Some(p) = points.iter().find(|p| !grid.contains(p)) {
        return Err(GridError::OutOfRange { t: p.t, v: p.v });
    }
    let mut occupancy = Occupancy::for_grid(grid);
    let n_v = grid.n_v();
    let mut retained = Vec::with_capacity(points.len().min(grid.bucket_count()));
    for p in points {
        let (i, j) = grid.bucket_index_unchecked(p);
        if occupancy.claim(i * n_v + j) {
            retained.push(*p);
        }
    }
    Ok(retained)
}
