//! Command-line harness: dataset generation, filtering, the experiment
//! matrix, path benchmarks and the HTTP server.

pub mod bench;
pub mod cli;
pub mod evaluate;
pub mod report;
