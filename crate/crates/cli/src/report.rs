//! Experiment tables. Each table is written as its own CSV file and all of
//! them are rolled up into `report.json`.

use std::fs::{self, File};
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub dataset: String,
    pub algorithm: String,
    pub input_points: usize,
    pub output_points: usize,
    /// Directed Hausdorff distance from the input to the output.
    pub distance: f64,
    /// Theoretical bound; Douglas-Peucker has none.
    pub bound: Option<f64>,
    pub within_bound: Option<bool>,
}

impl DistanceRow {
    pub fn violates(&self) -> bool {
        self.within_bound == Some(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchRow {
    pub dataset: String,
    pub passes: usize,
    pub original_points: usize,
    pub points_fetched: usize,
    pub points_returned: usize,
    pub fetch_ratio: f64,
    /// Batches times value buckets per batch.
    pub bound: usize,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRow {
    pub dataset: String,
    pub passes: usize,
    /// 1-based pass number.
    pub pass: usize,
    /// Largest working set of this pass over all batches.
    pub peak: usize,
    pub bound: usize,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub n_t: usize,
    pub n_v: usize,
    pub t_extent: f64,
    pub v_extent: f64,
    pub diagonal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rng_algorithm: String,
    pub seed: u64,
    pub points_per_dataset: usize,
    pub t_pre: f64,
    pub n_v_pre: usize,
    pub grid: GridInfo,
    pub distances: Vec<DistanceRow>,
    pub fetch_counts: Vec<FetchRow>,
    pub memory: Vec<MemoryRow>,
    pub violations: usize,
}

impl ExperimentReport {
    pub fn count_violations(&self) -> usize {
        self.distances.iter().filter(|r| r.violates()).count()
            + self.fetch_counts.iter().filter(|r| !r.within_bound).count()
            + self.memory.iter().filter(|r| !r.within_bound).count()
    }

    /// Writes `distances.csv`, `fetch_counts.csv`, `memory.csv` and
    /// `report.json` into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        write_table(&dir.join("distances.csv"), &self.distances)?;
        write_table(&dir.join("fetch_counts.csv"), &self.fetch_counts)?;
        write_table(&dir.join("memory.csv"), &self.memory)?;
        let file = File::create(dir.join("report.json"))?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }
}

pub fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
}
