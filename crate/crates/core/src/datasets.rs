//! Deterministic synthetic datasets laid out on a 300 by 100 chart.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{DataPoint, Series};

/// Identifier of the PRNG behind the random datasets; recorded in reports.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng/seed_from_u64 (rand_chacha 0.9)";

/// Values of every dataset fall in `[0, VALUE_MAX]`.
pub const VALUE_MAX: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("unknown dataset kind {0:?} (expected linear, periodic_01, periodic_10, uniform or normal)")]
    UnknownKind(String),
    #[error("time extent must be positive and finite (got {0})")]
    InvalidExtent(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// `v = t / 3`
    Linear,
    /// `v = 50·cos(2πt / 0.1) + 50`
    #[serde(rename = "periodic_01")]
    Periodic01,
    /// `v = 50·cos(2πt / 10) + 50`
    #[serde(rename = "periodic_10")]
    Periodic10,
    /// `v ~ U(0, 100)`
    Uniform,
    /// `v ~ N(50, 50/3)`, clamped to `[0, 100]`
    Normal,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 5] = [
        DatasetKind::Linear,
        DatasetKind::Periodic01,
        DatasetKind::Periodic10,
        DatasetKind::Uniform,
        DatasetKind::Normal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Linear => "linear",
            DatasetKind::Periodic01 => "periodic_01",
            DatasetKind::Periodic10 => "periodic_10",
            DatasetKind::Uniform => "uniform",
            DatasetKind::Normal => "normal",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DatasetError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n: usize,
    pub seed: u64,
    pub t_extent: f64,
}

impl DatasetSpec {
    pub const DEFAULT_T_EXTENT: f64 = 300.0;

    pub fn new(kind: DatasetKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            seed,
            t_extent: Self::DEFAULT_T_EXTENT,
        }
    }
}

/// Generates `n` points at `t_i = i·t_extent/n`. Identical specs give
/// bit-identical series.
pub fn generate(spec: &DatasetSpec) -> Result<Series, DatasetError> {
    if !(spec.t_extent.is_finite() && spec.t_extent > 0.0) {
        return Err(DatasetError::InvalidExtent(spec.t_extent));
    }
    let n = spec.n;
    let time = |i: usize| i as f64 * spec.t_extent / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let points: Vec<DataPoint> = match spec.kind {
        DatasetKind::Linear => (0..n).map(|i| {
            let t = time(i);
            DataPoint::new(t, t / 3.0)
        }).collect(),
        DatasetKind::Periodic01 => periodic(n, time, 0.1),
        DatasetKind::Periodic10 => periodic(n, time, 10.0),
        DatasetKind::Uniform => {
            let dist = Uniform::new(0.0, VALUE_MAX).expect("static bounds");
            (0..n).map(|i| DataPoint::new(time(i), rng.sample(dist))).collect()
        }
        DatasetKind::Normal => {
            let dist = Normal::<f64>::new(50.0, 50.0 / 3.0).expect("static parameters");
            (0..n)
                .map(|i| DataPoint::new(time(i), dist.sample(&mut rng).clamp(0.0, VALUE_MAX)))
                .collect()
        }
    };
    Ok(Series::from_sorted(points).with_id(spec.kind.name()))
}

fn periodic(n: usize, time: impl Fn(usize) -> f64, period: f64) -> Vec<DataPoint> {
    (0..n)
        .map(|i| {
            let t = time(i);
            DataPoint::new(t, 50.0 * (2.0 * PI * t / period).cos() + 50.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_last_point() {
        let s = generate(&DatasetSpec::new(DatasetKind::Linear, 100_000, 42)).unwrap();
        assert_eq!(s.len(), 100_000);
        let last = s.last().unwrap();
        assert!((last.t - 299.997).abs() < 1e-9);
        assert!((last.v - 99.999).abs() < 1e-9);
        assert_eq!(last.v, last.t / 3.0);
    }

    #[test]
    fn empty_and_invalid() {
        for kind in DatasetKind::ALL {
            assert!(generate(&DatasetSpec::new(kind, 0, 1)).unwrap().is_empty());
        }
        let mut spec = DatasetSpec::new(DatasetKind::Linear, 10, 1);
        spec.t_extent = 0.0;
        assert!(generate(&spec).is_err());
        assert!(matches!("sine".parse::<DatasetKind>(), Err(DatasetError::UnknownKind(_))));
    }

    #[test]
    fn values_in_range_and_times_increasing() {
        for kind in DatasetKind::ALL {
            let s = generate(&DatasetSpec::new(kind, 20_000, 7)).unwrap();
            assert!(s.iter().all(|p| (0.0..=VALUE_MAX).contains(&p.v)), "{kind}");
            assert!(s.points().windows(2).all(|w| w[0].t < w[1].t), "{kind}");
        }
    }

    #[test]
    fn periodic_starts_at_peak() {
        let s = generate(&DatasetSpec::new(DatasetKind::Periodic10, 10, 0)).unwrap();
        assert_eq!(s.first().unwrap().v, 100.0);
    }

    #[test]
    fn deterministic_per_seed() {
        for kind in [DatasetKind::Uniform, DatasetKind::Normal] {
            let a = generate(&DatasetSpec::new(kind, 1000, 9)).unwrap();
            let b = generate(&DatasetSpec::new(kind, 1000, 9)).unwrap();
            let c = generate(&DatasetSpec::new(kind, 1000, 10)).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in DatasetKind::ALL {
            assert_eq!(kind.name().parse::<DatasetKind>().unwrap(), kind);
            assert_eq!(
                serde_json::to_string(&kind).unwrap(),
                format!("\"{}\"", kind.name())
            );
        }
    }
}
