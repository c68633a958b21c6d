//! Pixel-bucket preemption filtering for time-series charts.
//!
//! A chart of `n_t × n_v` pixel buckets cannot show two points that share a
//! bucket as different points. [`filter::rppf_filter`] keeps the first point
//! landing in each bucket, which bounds the Hausdorff distance between the
//! original and filtered sets by the bucket diagonal.
//!
//! For long ranges the crate adds a second tier: [`preprocess`] reduces the
//! series batch by batch into persisted [`preprocess::Segment`]s, and
//! [`query`] answers wide range queries from those segments with a final
//! filter through the viewport grid. Distance bounds compose along the way
//! and are reported with every result.

pub mod datasets;
pub mod douglas_peucker;
pub mod filter;
pub mod grid;
pub mod metrics;
pub mod preprocess;
pub mod query;
pub mod series;
pub mod store;

pub use douglas_peucker::{douglas_peucker, point_segment_distance};
pub use filter::{rppf_filter, rppf_points, FilterResult};
pub use grid::{make_grid, BucketGrid, GridError};
pub use metrics::{
    chained_bound, directed_hausdorff, directed_hausdorff_brute, directed_hausdorff_grid,
    hausdorff, AxisScale, MetricsError,
};
pub use series::{DataPoint, Series, SeriesError};
