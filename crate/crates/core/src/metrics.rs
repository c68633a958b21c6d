//! Hausdorff distances between point sets and the bound calculators that go
//! with bucket filtering.
//!
//! Distances are measured in scaled coordinates:
//! `sqrt(((x.t - y.t) / s_t)² + ((x.v - y.v) / s_v)²)`. With the default
//! scale `(1, 1)` this is the plain Euclidean distance on the chart plane.
//!
//! [`directed_hausdorff_grid`] answers nearest-neighbour queries through a
//! uniform spatial hash with an expanding ring search. It evaluates the same
//! per-pair expression as [`directed_hausdorff_brute`] and only skips pairs
//! that provably cannot be nearest, so both return identical values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::DataPoint;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("distance is undefined for an empty point set")]
    EmptySet,
    #[error("axis scale must be positive and finite (got {s_t}, {s_v})")]
    InvalidScale { s_t: f64, s_v: f64 },
    #[error("spatial hash cell size must be positive and finite (got {0})")]
    InvalidCell(f64),
}

/// Per-axis units used to normalise distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisScale {
    s_t: f64,
    s_v: f64,
}

impl AxisScale {
    pub const UNIT: AxisScale = AxisScale { s_t: 1.0, s_v: 1.0 };

    pub fn new(s_t: f64, s_v: f64) -> Result<Self, MetricsError> {
        let ok = |s: f64| s.is_finite() && s > 0.0;
        if ok(s_t) && ok(s_v) {
            Ok(Self { s_t, s_v })
        } else {
            Err(MetricsError::InvalidScale { s_t, s_v })
        }
    }

    pub fn s_t(&self) -> f64 {
        self.s_t
    }

    pub fn s_v(&self) -> f64 {
        self.s_v
    }
}

impl Default for AxisScale {
    fn default() -> Self {
        Self::UNIT
    }
}

#[inline]
fn dist_sq(a: &DataPoint, b: &DataPoint, scale: &AxisScale) -> f64 {
    let dt = (a.t - b.t) / scale.s_t;
    let dv = (a.v - b.v) / scale.s_v;
    dt * dt + dv * dv
}

fn check(x: &[DataPoint], y: &[DataPoint]) -> Result<(), MetricsError> {
    if x.is_empty() || y.is_empty() {
        Err(MetricsError::EmptySet)
    } else {
        Ok(())
    }
}

/// `max_{x∈X} min_{y∈Y} dist(x, y)` by exhaustive O(|X|·|Y|) evaluation.
pub fn directed_hausdorff_brute(
    x: &[DataPoint],
    y: &[DataPoint],
    scale: AxisScale,
) -> Result<f64, MetricsError> {
    check(x, y)?;
    let worst = x
        .iter()
        .map(|a| {
            y.iter()
                .map(|b| dist_sq(a, b, &scale))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(worst.sqrt())
}

/// Same value as [`directed_hausdorff_brute`], computed through a uniform
/// spatial hash of `y` with cells of side `cell` (scaled units).
pub fn directed_hausdorff_grid(
    x: &[DataPoint],
    y: &[DataPoint],
    scale: AxisScale,
    cell: f64,
) -> Result<f64, MetricsError> {
    check(x, y)?;
    if !(cell.is_finite() && cell > 0.0) {
        return Err(MetricsError::InvalidCell(cell));
    }
    let hash = SpatialHash::build(y, scale, cell);
    let worst = x
        .iter()
        .map(|a| hash.nearest_sq(a, y))
        .fold(0.0, f64::max);
    Ok(worst.sqrt())
}

/// Grid-accelerated directed distance with a cell size picked from the
/// density of `y` (about one point per cell).
pub fn directed_hausdorff(
    x: &[DataPoint],
    y: &[DataPoint],
    scale: AxisScale,
) -> Result<f64, MetricsError> {
    check(x, y)?;
    directed_hausdorff_grid(x, y, scale, auto_cell(y, scale))
}

/// Symmetric distance `max(h(X, Y), h(Y, X))`.
pub fn hausdorff(x: &[DataPoint], y: &[DataPoint], scale: AxisScale) -> Result<f64, MetricsError> {
    Ok(directed_hausdorff(x, y, scale)?.max(directed_hausdorff(y, x, scale)?))
}

/// Upper bound on the distance after a chain of bucket filters: the sum of
/// the diagonals used at each stage.
pub fn chained_bound(diagonals: &[f64]) -> f64 {
    diagonals.iter().sum()
}

fn auto_cell(y: &[DataPoint], scale: AxisScale) -> f64 {
    let (mut t0, mut t1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in y {
        t0 = t0.min(p.t);
        t1 = t1.max(p.t);
        v0 = v0.min(p.v);
        v1 = v1.max(p.v);
    }
    let w = (t1 - t0) / scale.s_t;
    let h = (v1 - v0) / scale.s_v;
    let n = y.len() as f64;
    let cell = if w > 0.0 && h > 0.0 {
        (w * h / n).sqrt()
    } else {
        w.max(h) / n
    };
    if cell.is_finite() && cell > 0.0 {
        cell
    } else {
        1.0
    }
}

/// Cap on hash cells; coarser cells only cost speed, never exactness.
const MAX_CELLS: f64 = (1u64 << 22) as f64;

/// Clamp for cell coordinates of far-away query points.
const FAR: i64 = 1 << 40;

/// Compressed-row uniform grid over the scaled bounding box of a point set.
struct SpatialHash {
    t0: f64,
    v0: f64,
    cell: f64,
    cols: i64,
    rows: i64,
    scale: AxisScale,
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl SpatialHash {
    fn build(y: &[DataPoint], scale: AxisScale, cell: f64) -> Self {
        let (mut t0, mut t1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in y {
            t0 = t0.min(p.t);
            t1 = t1.max(p.t);
            v0 = v0.min(p.v);
            v1 = v1.max(p.v);
        }
        let w = (t1 - t0) / scale.s_t;
        let h = (v1 - v0) / scale.s_v;
        let mut cell = cell;
        let cells = (w / cell + 1.0) * (h / cell + 1.0);
        if cells > MAX_CELLS {
            cell *= (cells / MAX_CELLS).sqrt() * 1.01;
        }
        let cols = (w / cell).floor() as i64 + 1;
        let rows = (h / cell).floor() as i64 + 1;

        let mut hash = SpatialHash {
            t0,
            v0,
            cell,
            cols,
            rows,
            scale,
            offsets: vec![0; (cols * rows) as usize + 1],
            items: vec![0; y.len()],
        };
        let keys: Vec<usize> = y
            .iter()
            .map(|p| {
                let (c, r) = hash.cell_of(p);
                (r.clamp(0, rows - 1) * cols + c.clamp(0, cols - 1)) as usize
            })
            .collect();
        for &k in &keys {
            hash.offsets[k + 1] += 1;
        }
        for k in 0..hash.offsets.len() - 1 {
            hash.offsets[k + 1] += hash.offsets[k];
        }
        let mut cursor = hash.offsets.clone();
        for (idx, &k) in keys.iter().enumerate() {
            hash.items[cursor[k] as usize] = idx as u32;
            cursor[k] += 1;
        }
        hash
    }

    #[inline]
    fn cell_of(&self, p: &DataPoint) -> (i64, i64) {
        let c = ((p.t - self.t0) / self.scale.s_t / self.cell).floor();
        let r = ((p.v - self.v0) / self.scale.s_v / self.cell).floor();
        // Saturating float->int casts keep far-away queries well defined.
        (c as i64, r as i64)
    }

    #[inline]
    fn scan_cell(&self, c: i64, r: i64, a: &DataPoint, y: &[DataPoint], best: &mut f64) {
        let k = (r * self.cols + c) as usize;
        let (lo, hi) = (self.offsets[k] as usize, self.offsets[k + 1] as usize);
        for &idx in &self.items[lo..hi] {
            let d = dist_sq(a, &y[idx as usize], &self.scale);
            if d < *best {
                *best = d;
            }
        }
    }

    fn scan_row(&self, r: i64, c_lo: i64, c_hi: i64, a: &DataPoint, y: &[DataPoint], best: &mut f64) {
        if r < 0 || r >= self.rows {
            return;
        }
        for c in c_lo.max(0)..=c_hi.min(self.cols - 1) {
            self.scan_cell(c, r, a, y, best);
        }
    }

    fn scan_col(&self, c: i64, r_lo: i64, r_hi: i64, a: &DataPoint, y: &[DataPoint], best: &mut f64) {
        if c < 0 || c >= self.cols {
            return;
        }
        for r in r_lo.max(0)..=r_hi.min(self.rows - 1) {
            self.scan_cell(c, r, a, y, best);
        }
    }

    /// Squared distance from `a` to its nearest neighbour in `y`.
    fn nearest_sq(&self, a: &DataPoint, y: &[DataPoint]) -> f64 {
        let (cx, cy) = self.cell_of(a);
        let (cx, cy) = (cx.clamp(-FAR, FAR), cy.clamp(-FAR, FAR));
        // Rings below `first_ring` miss the grid entirely; beyond `last_ring`
        // nothing is left to visit.
        let first_ring = [-cx, cx - (self.cols - 1), -cy, cy - (self.rows - 1), 0]
            .into_iter()
            .max()
            .unwrap_or(0);
        let last_ring = [cx, self.cols - 1 - cx, cy, self.rows - 1 - cy]
            .into_iter()
            .map(i64::abs)
            .max()
            .unwrap_or(0);
        let mut best = f64::INFINITY;
        let mut k = first_ring;
        loop {
            if k == 0 {
                self.scan_row(cy, cx, cx, a, y, &mut best);
            } else {
                self.scan_row(cy - k, cx - k, cx + k, a, y, &mut best);
                self.scan_row(cy + k, cx - k, cx + k, a, y, &mut best);
                self.scan_col(cx - k, cy - k + 1, cy + k - 1, a, y, &mut best);
                self.scan_col(cx + k, cy - k + 1, cy + k - 1, a, y, &mut best);
            }
            if k >= last_ring {
                return best;
            }
            // Unvisited cells lie at Chebyshev index >= k + 1, hence at least
            // k * cell away. One cell of slack absorbs rounding in the cell
            // assignment.
            let reach = (k - 1).max(0) as f64 * self.cell;
            if best <= reach * reach {
                return best;
            }
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(pairs: &[(f64, f64)]) -> Vec<DataPoint> {
        pairs.iter().copied().map(DataPoint::from).collect()
    }

    const U: AxisScale = AxisScale::UNIT;

    #[test]
    fn brute_examples() {
        let x = pts(&[(0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(directed_hausdorff_brute(&x, &x, U).unwrap(), 0.0);
        assert_eq!(directed_hausdorff_brute(&x, &pts(&[(0.0, 0.0)]), U).unwrap(), 1.0);
        let x = pts(&[(0.0, 0.0), (3.0, 4.0)]);
        assert_eq!(directed_hausdorff_brute(&x, &pts(&[(0.0, 0.0)]), U).unwrap(), 5.0);
    }

    #[test]
    fn grid_examples() {
        let x = pts(&[(0.0, 0.0), (3.0, 4.0)]);
        assert_eq!(directed_hausdorff_grid(&x, &x, U, 1.0).unwrap(), 0.0);
        assert_eq!(directed_hausdorff_grid(&x, &pts(&[(0.0, 0.0)]), U, 1.0).unwrap(), 5.0);
        assert_eq!(directed_hausdorff_grid(&x, &pts(&[(0.0, 0.0)]), U, 0.01).unwrap(), 5.0);
    }

    #[test]
    fn symmetric_examples() {
        assert_eq!(hausdorff(&pts(&[(0.0, 0.0)]), &pts(&[(0.0, 1.0)]), U).unwrap(), 1.0);
        assert_eq!(
            hausdorff(&pts(&[(0.0, 0.0), (10.0, 0.0)]), &pts(&[(4.0, 0.0)]), U).unwrap(),
            6.0
        );
    }

    #[test]
    fn errors() {
        let x = pts(&[(0.0, 0.0)]);
        assert_eq!(directed_hausdorff_brute(&[], &x, U), Err(MetricsError::EmptySet));
        assert_eq!(directed_hausdorff_brute(&x, &[], U), Err(MetricsError::EmptySet));
        assert_eq!(hausdorff(&x, &[], U), Err(MetricsError::EmptySet));
        assert!(matches!(
            directed_hausdorff_grid(&x, &x, U, 0.0),
            Err(MetricsError::InvalidCell(_))
        ));
        assert!(AxisScale::new(0.0, 1.0).is_err());
        assert!(AxisScale::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn scale_normalises_axes() {
        let s = AxisScale::new(2.0, 0.5).unwrap();
        let x = pts(&[(4.0, 1.5)]);
        let y = pts(&[(0.0, 0.0)]);
        // (4/2, 1.5/0.5) = (2, 3)
        assert_eq!(directed_hausdorff_brute(&x, &y, s).unwrap(), 13f64.sqrt());
        assert_eq!(directed_hausdorff(&x, &y, s).unwrap(), 13f64.sqrt());
    }

    #[test]
    fn chained_bound_sums() {
        assert_eq!(chained_bound(&[]), 0.0);
        assert_eq!(chained_bound(&[std::f64::consts::SQRT_2]), std::f64::consts::SQRT_2);
        let d = 1.25;
        assert_eq!(chained_bound(&[d; 6]), 6.0 * d);
    }

    #[test]
    fn far_query_points_and_degenerate_sets() {
        let y = pts(&[(5.0, 5.0), (5.0, 5.0)]);
        let x = pts(&[(1e6, -1e6), (5.0, 5.0), (-3.0, 2.0)]);
        for cell in [1e-3, 1.0, 1e3] {
            assert_eq!(
                directed_hausdorff_grid(&x, &y, U, cell).unwrap(),
                directed_hausdorff_brute(&x, &y, U).unwrap()
            );
        }
        let line = pts(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]);
        assert_eq!(
            directed_hausdorff(&x, &line, U).unwrap(),
            directed_hausdorff_brute(&x, &line, U).unwrap()
        );
    }

    #[test]
    fn large_epoch_timestamps_stay_exact() {
        let base = 1.7e9;
        let y: Vec<_> = (0..300).map(|i| DataPoint::new(base + i as f64 * 0.37, (i % 17) as f64)).collect();
        let x: Vec<_> = (0..500).map(|i| DataPoint::new(base + i as f64 * 0.21, (i % 23) as f64 * 0.7)).collect();
        assert_eq!(
            directed_hausdorff(&x, &y, U).unwrap(),
            directed_hausdorff_brute(&x, &y, U).unwrap()
        );
    }

    fn arb_set(max: usize) -> impl Strategy<Value = Vec<DataPoint>> {
        prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 1..max)
            .prop_map(|v| v.into_iter().map(DataPoint::from).collect())
    }

    proptest! {
        #[test]
        fn grid_equals_brute(x in arb_set(120), y in arb_set(120), cell in 0.05..50.0f64) {
            prop_assert_eq!(
                directed_hausdorff_grid(&x, &y, U, cell).unwrap(),
                directed_hausdorff_brute(&x, &y, U).unwrap()
            );
        }

        #[test]
        fn identity_symmetry_and_subset(x in arb_set(80), y in arb_set(80)) {
            prop_assert_eq!(hausdorff(&x, &x, U).unwrap(), 0.0);
            prop_assert_eq!(hausdorff(&x, &y, U).unwrap(), hausdorff(&y, &x, U).unwrap());
            let sub = &x[..x.len().div_ceil(2)];
            prop_assert_eq!(directed_hausdorff(sub, &x, U).unwrap(), 0.0);
        }

        #[test]
        fn triangle_inequality(a in arb_set(60), b in arb_set(60), c in arb_set(60)) {
            let ac = hausdorff(&a, &c, U).unwrap();
            let ab = hausdorff(&a, &b, U).unwrap();
            let bc = hausdorff(&b, &c, U).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }
    }
}
