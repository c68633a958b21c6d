use std::fs::File;
use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use arppf_core::datasets::{generate, DatasetError, DatasetKind, DatasetSpec};
use arppf_core::preprocess::{BatchConfig, PreprocessError};
use arppf_core::query::QueryOptions;
use arppf_core::store::{read_csv, write_csv, Store, StoreError};
use arppf_core::{
    directed_hausdorff, douglas_peucker, make_grid, rppf_filter, AxisScale, GridError, MetricsError, Series,
};
use arppf_service::{router, serve, ServiceConfig, DEFAULT_ADDR, DEFAULT_PORT};

use crate::bench::{bench_series, BenchConfig, BenchError};
use crate::evaluate::{self, EvaluateConfig, EvaluateError};

#[derive(Debug, Parser)]
#[command(name = "arppf", version, about = "Bucket-preemption filtering for long time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as `t,v` CSV.
    Generate {
        #[arg(long)]
        dataset: DatasetKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter a CSV series and report the distance to the input.
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        /// Bucket grid as WIDTHxHEIGHT, e.g. 300x100.
        #[arg(long, default_value = "300x100")]
        grid: GridSpec,
        #[arg(long, value_enum, default_value_t = Algo::Rppf)]
        algo: Algo,
        /// Douglas-Peucker tolerance (required with --algo dp).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Time range of the grid as LO:HI; defaults to the data extent.
        #[arg(long)]
        t_range: Option<Range>,
        /// Value range of the grid as LO:HI; defaults to the data extent.
        #[arg(long)]
        v_range: Option<Range>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the dataset × algorithm matrix and write CSV tables plus report.json.
    Evaluate {
        /// Use the published setup: 100000 points per dataset, seed 42.
        #[arg(long, conflicts_with_all = ["n", "seed"])]
        reproduce_paper: bool,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare raw and preprocessed query latency on a CSV series.
    Bench {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t_pre: f64,
        #[arg(long, default_value_t = 1)]
        passes: usize,
        /// Value buckets per batch during preprocessing.
        #[arg(long, default_value_t = 100)]
        v_buckets: usize,
        #[arg(long, default_value_t = 10)]
        repeat: usize,
        #[arg(long, default_value = "300x100")]
        grid: GridSpec,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Append a CSV file to a series in a store directory.
    Ingest {
        #[arg(long, env = "ARPPF_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long)]
        series: String,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Preprocess a stored series into segments.
    Preprocess {
        #[arg(long, env = "ARPPF_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long)]
        series: String,
        #[arg(long, default_value_t = 1.0)]
        t_pre: f64,
        #[arg(long, default_value_t = 1)]
        passes: usize,
        #[arg(long, default_value_t = 100)]
        n_v: usize,
    },
    /// Serve the HTTP API over a store directory.
    Serve {
        #[arg(long, env = "ARPPF_ADDR", default_value = DEFAULT_ADDR)]
        addr: IpAddr,
        #[arg(long, env = "ARPPF_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, env = "ARPPF_DATA_DIR")]
        data_dir: PathBuf,
        /// Allowed browser origin; any origin when omitted.
        #[arg(long, env = "ARPPF_CORS_ORIGIN")]
        cors_origin: Option<String>,
        /// Spans below this are answered from raw data in auto mode.
        #[arg(long)]
        raw_cutoff: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Rppf,
    Dp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub n_t: usize,
    pub n_v: usize,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected WIDTHxHEIGHT with positive integers, got {s:?}");
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let n_t: usize = w.trim().parse().map_err(|_| bad())?;
        let n_v: usize = h.trim().parse().map_err(|_| bad())?;
        if n_t == 0 || n_v == 0 {
            return Err(bad());
        }
        Ok(GridSpec { n_t, n_v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range(pub f64, pub f64);

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected LO:HI, got {s:?}");
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        Ok(Range(lo, hi))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Evaluate(#[from] EvaluateError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// A measured distance, fetch count or memory peak exceeded its bound.
    BoundViolation,
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn load_csv(path: &Path) -> Result<Series, CliError> {
    let file = File::open(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(read_csv(io::BufReader::new(file))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct FilterReport {
    pub algo: &'static str,
    pub n_t: usize,
    pub n_v: usize,
    pub t_range: (f64, f64),
    pub v_range: (f64, f64),
    pub epsilon: Option<f64>,
    pub input_count: usize,
    pub output_count: usize,
    pub distance: f64,
    pub bound: Option<f64>,
    pub within_bound: Option<bool>,
}

fn run_filter(
    input: &Path,
    grid: GridSpec,
    algo: Algo,
    epsilon: Option<f64>,
    t_range: Option<Range>,
    v_range: Option<Range>,
    out: &Path,
    report: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<Outcome, CliError> {
    let epsilon = match (algo, epsilon) {
        (Algo::Dp, None) => return Err(CliError::Usage("--algo dp requires --epsilon".into())),
        (Algo::Dp, Some(e)) if !(e.is_finite() && e >= 0.0) => {
            return Err(CliError::Usage(format!("--epsilon must be a non-negative number, got {e}")))
        }
        (Algo::Rppf, _) => None,
        (Algo::Dp, e) => e,
    };
    let series = load_csv(input)?;
    let (Some(t_ext), Some(v_ext)) = (series.time_extent(), series.value_extent()) else {
        return Err(CliError::Usage(format!("{} holds no points", input.display())));
    };
    let t_range = t_range.map_or(t_ext, |Range(a, b)| (a, b));
    let v_range = v_range.map_or(v_ext, |Range(a, b)| (a, b));
    // A single timestamp still needs a positive-width time axis.
    let t_range = if t_range.0 == t_range.1 { (t_range.0, t_range.0 + 1.0) } else { t_range };
    let g = make_grid(t_range, v_range, grid.n_t, grid.n_v)?;

    let (kept, bound) = match epsilon {
        Some(eps) => (douglas_peucker(&series, eps), None),
        None => (rppf_filter(&series, &g)?.retained, Some(g.diagonal())),
    };
    let distance = directed_hausdorff(series.points(), kept.points(), AxisScale::UNIT)?;
    let within = bound.map(|b| distance <= b * (1.0 + 1e-9));
    write_csv(&kept, create(out)?)?;

    let summary = FilterReport {
        algo: match algo {
            Algo::Rppf => "rppf",
            Algo::Dp => "dp",
        },
        n_t: g.n_t(),
        n_v: g.n_v(),
        t_range,
        v_range,
        epsilon,
        input_count: series.len(),
        output_count: kept.len(),
        distance,
        bound,
        within_bound: within,
    };
    if let Some(path) = report {
        write_json(path, &summary)?;
    }
    match bound {
        Some(b) => writeln!(
            stdout,
            "{}: {} -> {} points, distance {distance:.6} (bound {b:.6})",
            summary.algo, summary.input_count, summary.output_count
        )?,
        None => writeln!(
            stdout,
            "{}: {} -> {} points, distance {distance:.6} (no bound)",
            summary.algo, summary.input_count, summary.output_count
        )?,
    }
    Ok(if within == Some(false) { Outcome::BoundViolation } else { Outcome::Ok })
}

/// Runs one parsed command, writing human-readable output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Generate { dataset, n, seed, out } => {
            let series = generate(&DatasetSpec::new(dataset, n, seed))?;
            write_csv(&series, create(&out)?)?;
            writeln!(stdout, "wrote {n} {dataset} points to {}", out.display())?;
            Ok(Outcome::Ok)
        }
        Command::Filter {
            input,
            grid,
            algo,
            epsilon,
            t_range,
            v_range,
            out,
            report,
        } => run_filter(&input, grid, algo, epsilon, t_range, v_range, &out, report.as_deref(), stdout),
        Command::Evaluate { reproduce_paper, n, seed, out } => {
            let cfg = if reproduce_paper {
                EvaluateConfig::default()
            } else {
                EvaluateConfig {
                    n,
                    seed,
                    ..EvaluateConfig::default()
                }
            };
            let report = evaluate::run(&cfg)?;
            report.write_dir(&out).map_err(|source| CliError::File {
                path: out.clone(),
                source,
            })?;
            writeln!(stdout, "{:<12} {:<12} {:>8} {:>10} {:>10}", "dataset", "algorithm", "output", "distance", "bound")?;
            for row in &report.distances {
                let bound = row.bound.map_or("-".to_string(), |b| format!("{b:.4}"));
                writeln!(
                    stdout,
                    "{:<12} {:<12} {:>8} {:>10.4} {:>10}",
                    row.dataset, row.algorithm, row.output_points, row.distance, bound
                )?;
            }
            for row in &report.fetch_counts {
                writeln!(
                    stdout,
                    "{} ({} pass): fetched {} of {} ({:.1}%)",
                    row.dataset,
                    row.passes,
                    row.points_fetched,
                    row.original_points,
                    100.0 * row.fetch_ratio
                )?;
            }
            writeln!(stdout, "{} bound violations; tables in {}", report.violations, out.display())?;
            Ok(if report.violations == 0 { Outcome::Ok } else { Outcome::BoundViolation })
        }
        Command::Bench {
            input,
            t_pre,
            passes,
            v_buckets,
            repeat,
            grid,
            json,
        } => {
            let series = load_csv(&input)?;
            let cfg = BenchConfig {
                t_pre,
                passes,
                n_v_pre: v_buckets,
                repeat,
                buckets_t: grid.n_t,
                buckets_v: grid.n_v,
            };
            let r = bench_series(&series, &cfg)?;
            writeln!(stdout, "range [{}, {}), {} raw points, {repeat} repeats", r.t_from, r.t_to, r.raw_points)?;
            for t in [&r.raw, &r.preprocessed] {
                writeln!(
                    stdout,
                    "{:<13} median {:>9.3} ms  fetched {:>8}  returned {:>6}",
                    t.path.to_string(),
                    t.median_ms,
                    t.points_fetched,
                    t.points_returned
                )?;
            }
            writeln!(stdout, "speedup {:.2}x, fetched ratio {:.3}", r.speedup, r.fetched_ratio)?;
            if let Some(path) = json {
                write_json(&path, &r)?;
            }
            Ok(Outcome::Ok)
        }
        Command::Ingest { data_dir, series, input } => {
            let store = Store::open(data_dir)?;
            let file = File::open(&input).map_err(|source| CliError::File { path: input, source })?;
            let n = store.ingest_csv(&series, io::BufReader::new(file))?;
            writeln!(stdout, "ingested {n} points into {series}")?;
            Ok(Outcome::Ok)
        }
        Command::Preprocess {
            data_dir,
            series,
            t_pre,
            passes,
            n_v,
        } => {
            let store = Store::open(data_dir)?;
            let report = store.preprocess(&series, &BatchConfig::new(t_pre, passes, n_v)?)?;
            writeln!(
                stdout,
                "{series}: {} segments, kept {} of {} points, max per-pass memory {} (bound {}), max segment bound {:.4}",
                report.segment_count,
                report.retained_total,
                report.raw_total,
                report.max_per_pass_memory,
                report.max_memory_bound,
                report.max_distance_bound
            )?;
            Ok(Outcome::Ok)
        }
        Command::Serve {
            addr,
            port,
            data_dir,
            cors_origin,
            raw_cutoff,
        } => {
            let store = Arc::new(Store::open(&data_dir)?);
            let cors_origin = cors_origin
                .map(|o| o.parse().map_err(|_| CliError::Usage(format!("invalid origin {o:?}"))))
                .transpose()?;
            let config = ServiceConfig {
                cors_origin,
                query: QueryOptions {
                    raw_cutoff_span: raw_cutoff,
                },
                ..ServiceConfig::default()
            };
            let app = router(store, &config);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(SocketAddr::new(addr, port)).await?;
                writeln!(stdout, "listening on http://{}", listener.local_addr()?)?;
                stdout.flush()?;
                serve(listener, app).await
            })?;
            Ok(Outcome::Ok)
        }
    }
}
