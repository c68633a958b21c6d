//! Douglas-Peucker line simplification, kept as the baseline the bucket
//! filter is compared against.

use crate::series::{DataPoint, Series};

/// Euclidean distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: &DataPoint, a: &DataPoint, b: &DataPoint) -> f64 {
    let (dt, dv) = (b.t - a.t, b.v - a.v);
    let len_sq = dt * dt + dv * dv;
    if len_sq == 0.0 {
        return (p.t - a.t).hypot(p.v - a.v);
    }
    let s = (((p.t - a.t) * dt + (p.v - a.v) * dv) / len_sq).clamp(0.0, 1.0);
    (p.t - (a.t + s * dt)).hypot(p.v - (a.v + s * dv))
}

/// Simplifies `series` with tolerance `epsilon`.
///
/// Endpoints are always kept. Series shorter than 3 points come back
/// unchanged. The recursion runs on an explicit stack, so long collinear
/// runs cannot exhaust the call stack.
pub fn douglas_peucker(series: &Series, epsilon: f64) -> Series {
    let points = series.points();
    if points.len() < 3 {
        return series.clone();
    }
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    keep[points.len() - 1] = true;

    let mut stack = vec![(0usize, points.len() - 1)];
    while let Some((first, last)) = stack.pop() {
        if last <= first + 1 {
            continue;
        }
        let (a, b) = (&points[first], &points[last]);
        let mut split = first;
        let mut dmax = 0.0;
        for (k, p) in points.iter().enumerate().take(last).skip(first + 1) {
            let d = point_segment_distance(p, a, b);
            if d > dmax {
                dmax = d;
                split = k;
            }
        }
        if dmax > epsilon {
            keep[split] = true;
            stack.push((split, last));
            stack.push((first, split));
        }
    }

    let kept = points
        .iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(*p))
        .collect();
    Series::from_sorted(kept)
}
