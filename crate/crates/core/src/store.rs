//! Embedded file-backed storage for raw series and preprocessed segments.
//!
//! Layout under the store root:
//!
//! ```text
//! <series_id>/meta.json           series metadata (JSON)
//! <series_id>/raw.bin             raw points, 16-byte records: f64 LE t, f64 LE v
//! <series_id>/segments/<k>.seg    one file per batch k: a JSON header line,
//!                                 then the retained points as 16-byte records
//! ```
//!
//! Segment and metadata files are replaced by write-to-temp-then-rename, so a
//! reader sees either the old or the new version. The raw log is append-only;
//! `meta.json` records how many records are committed and readers never look
//! past that count.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{
    batch_index_of, preprocess_series, BatchConfig, PreprocessError, PreprocessReport, RawSource,
    Segment, SegmentSink,
};
use crate::series::{DataPoint, Series};

pub const RECORD_LEN: usize = 16;

const META_FILE: &str = "meta.json";
const RAW_FILE: &str = "raw.bin";
const SEGMENT_DIR: &str = "segments";
const SEGMENT_EXT: &str = "seg";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown series {0:?}")]
    UnknownSeries(String),
    #[error("series {0:?} has no raw data")]
    NoData(String),
    #[error("invalid series id {0:?}: use letters, digits, '-', '_' or '.'")]
    InvalidSeriesId(String),
    #[error("CSV header must be `t,v` (got {0:?})")]
    BadHeader(String),
    #[error("malformed CSV at row {row}: {reason}")]
    MalformedRow { row: u64, reason: String },
    #[error("invalid UTF-8 at row {row}")]
    Encoding { row: u64 },
    #[error("timestamp regression at row {row}: {t} < {previous}")]
    OutOfOrder { row: u64, t: f64, previous: f64 },
    #[error("invalid range [{t_from}, {t_to})")]
    InvalidRange { t_from: f64, t_to: f64 },
    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

/// Listing entry for one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCatalogEntry {
    pub series_id: String,
    pub raw_count: usize,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub preprocess_config: Option<BatchConfig>,
    pub segment_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SeriesMeta {
    series_id: String,
    raw_count: usize,
    t_min: Option<f64>,
    t_max: Option<f64>,
    preprocess_config: Option<BatchConfig>,
}

/// JSON header line of a segment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SegmentHeader {
    series_id: String,
    batch_index: i64,
    t_start: f64,
    t_end: f64,
    v_min: f64,
    v_max: f64,
    passes_used: usize,
    pass_diagonals: Vec<f64>,
    raw_count: usize,
}

/// Single-writer, multi-reader store rooted at a directory.
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    writers: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            writers: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn writer_lock(&self, series_id: &str) -> Arc<Mutex<()>> {
        let mut map = self.writers.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(series_id.to_string()).or_default().clone()
    }

    fn series_dir(&self, series_id: &str) -> Result<PathBuf, StoreError> {
        validate_id(series_id)?;
        Ok(self.root.join(series_id))
    }

    fn load_meta(&self, series_id: &str) -> Result<SeriesMeta, StoreError> {
        let path = self.series_dir(series_id)?.join(META_FILE);
        match fs::read(&path) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                Err(StoreError::UnknownSeries(series_id.to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn save_meta(&self, meta: &SeriesMeta) -> Result<(), StoreError> {
        let dir = self.series_dir(&meta.series_id)?;
        write_atomic(&dir.join(META_FILE), &serde_json::to_vec_pretty(meta)?)
    }

    pub fn contains(&self, series_id: &str) -> bool {
        self.load_meta(series_id).is_ok()
    }

    /// Appends CSV rows (`t,v` header) to the series, creating it if needed.
    ///
    /// The whole body is validated before anything is written. Existing
    /// segments are dropped since they no longer cover the raw data.
    pub fn ingest_csv<R: Read>(&self, series_id: &str, source: R) -> Result<usize, StoreError> {
        validate_id(series_id)?;
        let lock = self.writer_lock(series_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let previous = match self.load_meta(series_id) {
            Ok(meta) => meta.t_max,
            Err(StoreError::UnknownSeries(_)) => None,
            Err(e) => return Err(e),
        };
        let points = parse_csv(source, previous)?;
        self.append_locked(series_id, &points)
    }

    /// Appends already-validated points; they must not precede the stored tail.
    pub fn append(&self, series_id: &str, points: &Series) -> Result<usize, StoreError> {
        validate_id(series_id)?;
        let lock = self.writer_lock(series_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        if let (Ok(SeriesMeta { t_max: Some(prev), .. }), Some(first)) =
            (self.load_meta(series_id), points.first())
        {
            if first.t < prev {
                return Err(StoreError::OutOfOrder {
                    row: 1,
                    t: first.t,
                    previous: prev,
                });
            }
        }
        self.append_locked(series_id, points.points())
    }

    fn append_locked(&self, series_id: &str, points: &[DataPoint]) -> Result<usize, StoreError> {
        let dir = self.series_dir(series_id)?;
        fs::create_dir_all(&dir)?;
        let mut meta = match self.load_meta(series_id) {
            Ok(meta) => meta,
            Err(StoreError::UnknownSeries(_)) => SeriesMeta {
                series_id: series_id.to_string(),
                raw_count: 0,
                t_min: None,
                t_max: None,
                preprocess_config: None,
            },
            Err(e) => return Err(e),
        };

        if !points.is_empty() {
            let mut file = OpenOptions::new()
                .create(true)
                .truncate(false)
                .write(true)
                .open(dir.join(RAW_FILE))?;
            // Drop any uncommitted tail left by an interrupted append.
            file.set_len((meta.raw_count * RECORD_LEN) as u64)?;
            file.seek(SeekFrom::End(0))?;
            let mut buf = Vec::with_capacity(points.len() * RECORD_LEN);
            for p in points {
                encode_point(p, &mut buf);
            }
            file.write_all(&buf)?;
            file.sync_data()?;

            meta.raw_count += points.len();
            meta.t_min = meta.t_min.or(Some(points[0].t));
            meta.t_max = Some(points[points.len() - 1].t);
            if meta.preprocess_config.take().is_some() {
                self.clear_segments_locked(series_id)?;
            }
        }
        self.save_meta(&meta)?;
        Ok(points.len())
    }

    /// Raw points with `t_from <= t < t_to`.
    pub fn read_raw(&self, series_id: &str, t_from: f64, t_to: f64) -> Result<Series, StoreError> {
        check_range(t_from, t_to)?;
        let meta = self.load_meta(series_id)?;
        if meta.raw_count == 0 || t_to <= t_from {
            return Ok(Series::empty().with_id(series_id));
        }
        let mut file = File::open(self.series_dir(series_id)?.join(RAW_FILE))?;
        let lo = lower_bound(&mut file, meta.raw_count, t_from)?;
        let hi = lower_bound(&mut file, meta.raw_count, t_to)?;
        let mut buf = vec![0u8; (hi.saturating_sub(lo)) * RECORD_LEN];
        file.seek(SeekFrom::Start((lo * RECORD_LEN) as u64))?;
        file.read_exact(&mut buf)?;
        Ok(Series::from_sorted(decode_points(&buf)).with_id(series_id))
    }

    /// Atomically writes (or replaces) the segment for
    /// `(segment.series_id, segment.batch_index)`.
    pub fn write_segment(&self, segment: &Segment) -> Result<(), StoreError> {
        let dir = self.series_dir(&segment.series_id)?.join(SEGMENT_DIR);
        fs::create_dir_all(&dir)?;
        let header = SegmentHeader {
            series_id: segment.series_id.clone(),
            batch_index: segment.batch_index,
            t_start: segment.t_start,
            t_end: segment.t_end,
            v_min: segment.v_min,
            v_max: segment.v_max,
            passes_used: segment.passes_used,
            pass_diagonals: segment.pass_diagonals.clone(),
            raw_count: segment.raw_count,
        };
        let mut bytes = serde_json::to_vec(&header)?;
        bytes.push(b'\n');
        for p in &segment.retained {
            encode_point(p, &mut bytes);
        }
        write_atomic(&dir.join(segment_file_name(segment.batch_index)), &bytes)
    }

    /// Segments whose `[t_start, t_end)` intersects `[t_from, t_to)`, ordered
    /// by `t_start`.
    pub fn read_segments(&self, series_id: &str, t_from: f64, t_to: f64) -> Result<Vec<Segment>, StoreError> {
        check_range(t_from, t_to)?;
        let meta = self.load_meta(series_id)?;
        if t_to <= t_from {
            return Ok(Vec::new());
        }
        let dir = self.series_dir(series_id)?.join(SEGMENT_DIR);
        // With a known batch width the candidate files are known too; only a
        // store without a recorded config needs a directory listing.
        let indices: Vec<i64> = match (meta.preprocess_config, meta.t_min, meta.t_max) {
            (Some(cfg), Some(t_min), Some(t_max)) => {
                let lo = batch_index_of(t_from.max(t_min), cfg.t_pre);
                let hi = batch_index_of(t_to.min(t_max), cfg.t_pre);
                (lo..=hi).collect()
            }
            _ => segment_indices(&dir)?,
        };
        let mut out = Vec::new();
        for k in indices {
            match read_segment_file(&dir.join(segment_file_name(k)))? {
                Some(seg) if seg.t_start < t_to && t_from < seg.t_end => out.push(seg),
                _ => {}
            }
        }
        out.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
        Ok(out)
    }

    pub fn segment_count(&self, series_id: &str) -> Result<usize, StoreError> {
        Ok(segment_indices(&self.series_dir(series_id)?.join(SEGMENT_DIR))?.len())
    }

    pub fn clear_segments(&self, series_id: &str) -> Result<(), StoreError> {
        self.load_meta(series_id)?;
        let lock = self.writer_lock(series_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        self.clear_segments_locked(series_id)
    }

    fn clear_segments_locked(&self, series_id: &str) -> Result<(), StoreError> {
        let dir = self.series_dir(series_id)?.join(SEGMENT_DIR);
        match fs::remove_dir_all(&dir) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }

    /// Replaces all segments of the series with a fresh preprocessing run.
    pub fn preprocess(&self, series_id: &str, config: &BatchConfig) -> Result<PreprocessReport, StoreError> {
        config.validate()?;
        let lock = self.writer_lock(series_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut meta = self.load_meta(series_id)?;
        if meta.raw_count == 0 {
            return Err(StoreError::NoData(series_id.to_string()));
        }
        self.clear_segments_locked(series_id)?;
        meta.preprocess_config = None;
        self.save_meta(&meta)?;

        let source = StoredSeries { store: self, series_id };
        let mut sink = SegmentWriter { store: self };
        let report = preprocess_series(series_id, &source, config, &mut sink)?;
        meta.preprocess_config = Some(*config);
        self.save_meta(&meta)?;
        Ok(report)
    }

    pub fn catalog_entry(&self, series_id: &str) -> Result<SeriesCatalogEntry, StoreError> {
        let meta = self.load_meta(series_id)?;
        Ok(SeriesCatalogEntry {
            segment_count: self.segment_count(series_id)?,
            series_id: meta.series_id,
            raw_count: meta.raw_count,
            t_min: meta.t_min,
            t_max: meta.t_max,
            preprocess_config: meta.preprocess_config,
        })
    }

    /// Every series in the store, sorted by id.
    pub fn list_series(&self) -> Result<Vec<SeriesCatalogEntry>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            let Some(name) = entry.file_name().to_str().map(str::to_string) else {
                continue;
            };
            if validate_id(&name).is_err() || !entry.path().join(META_FILE).exists() {
                continue;
            }
            out.push(self.catalog_entry(&name)?);
        }
        out.sort_by(|a, b| a.series_id.cmp(&b.series_id));
        Ok(out)
    }
}

/// A stored series seen as a [`RawSource`].
pub struct StoredSeries<'a> {
    pub store: &'a Store,
    pub series_id: &'a str,
}

impl RawSource for StoredSeries<'_> {
    type Error = StoreError;

    fn extent(&self) -> Result<Option<(f64, f64)>, StoreError> {
        let meta = self.store.load_meta(self.series_id)?;
        Ok(meta.t_min.zip(meta.t_max))
    }

    fn read_range(&self, t_from: f64, t_to: f64) -> Result<Vec<DataPoint>, StoreError> {
        Ok(self.store.read_raw(self.series_id, t_from, t_to)?.into_points())
    }
}

/// Writes segments straight into a [`Store`].
pub struct SegmentWriter<'a> {
    pub store: &'a Store,
}

impl SegmentSink for SegmentWriter<'_> {
    type Error = StoreError;

    fn write_segment(&mut self, segment: &Segment) -> Result<(), StoreError> {
        self.store.write_segment(segment)
    }
}

fn validate_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidSeriesId(id.to_string()))
    }
}

fn check_range(t_from: f64, t_to: f64) -> Result<(), StoreError> {
    if t_from.is_nan() || t_to.is_nan() || t_to < t_from {
        Err(StoreError::InvalidRange { t_from, t_to })
    } else {
        Ok(())
    }
}

fn segment_file_name(batch_index: i64) -> String {
    format!("{batch_index}.{SEGMENT_EXT}")
}

fn segment_indices(dir: &Path) -> Result<Vec<i64>, StoreError> {
    let entries = match fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for entry in entries {
        let name = entry?.file_name();
        let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".seg")) else {
            continue;
        };
        if let Ok(k) = stem.parse::<i64>() {
            out.push(k);
        }
    }
    out.sort_unstable();
    Ok(out)
}

fn read_segment_file(path: &Path) -> Result<Option<Segment>, StoreError> {
    let corrupt = |reason: &str| StoreError::Corrupt {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| corrupt("missing header line"))?;
    let header: SegmentHeader = serde_json::from_slice(&bytes[..split])?;
    let body = &bytes[split + 1..];
    if body.len() % RECORD_LEN != 0 {
        return Err(corrupt("truncated point record"));
    }
    Ok(Some(Segment {
        series_id: header.series_id,
        batch_index: header.batch_index,
        t_start: header.t_start,
        t_end: header.t_end,
        v_min: header.v_min,
        v_max: header.v_max,
        passes_used: header.passes_used,
        retained: decode_points(body),
        raw_count: header.raw_count,
        pass_diagonals: header.pass_diagonals,
    }))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths have a parent");
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut file = File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    #[cfg(unix)]
    File::open(dir)?.sync_all()?;
    Ok(())
}

fn encode_point(p: &DataPoint, out: &mut Vec<u8>) {
    out.extend_from_slice(&p.t.to_le_bytes());
    out.extend_from_slice(&p.v.to_le_bytes());
}

fn decode_points(bytes: &[u8]) -> Vec<DataPoint> {
    bytes
        .chunks_exact(RECORD_LEN)
        .map(|r| {
            let t = f64::from_le_bytes(r[..8].try_into().expect("8 bytes"));
            let v = f64::from_le_bytes(r[8..].try_into().expect("8 bytes"));
            DataPoint::new(t, v)
        })
        .collect()
}

/// First record index in `[0, count)` whose `t` is not below `t`.
fn lower_bound(file: &mut File, count: usize, t: f64) -> Result<usize, StoreError> {
    let (mut lo, mut hi) = (0usize, count);
    let mut buf = [0u8; 8];
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        file.seek(SeekFrom::Start((mid * RECORD_LEN) as u64))?;
        file.read_exact(&mut buf)?;
        if f64::from_le_bytes(buf) < t {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Reads a whole `t,v` CSV file with the same validation as ingestion.
pub fn read_csv<R: Read>(source: R) -> Result<Series, StoreError> {
    Ok(Series::from_sorted(parse_csv(source, None)?))
}

/// Writes `series` as `t,v` CSV. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn write_csv<W: Write>(series: &Series, sink: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(sink);
    out.write_all(b"t,v\n")?;
    for p in series.iter() {
        writeln!(out, "{},{}", p.t, p.v)?;
    }
    out.flush()
}

/// Parses a `t,v` CSV body. `previous` is the last stored timestamp.
fn parse_csv<R: Read>(source: R, mut previous: Option<f64>) -> Result<Vec<DataPoint>, StoreError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "v" {
        return Err(StoreError::BadHeader(headers.iter().collect::<Vec<_>>().join(",")));
    }

    let mut points = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let row = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(e, row)),
        }
        let row = record.position().map_or(row, |p| p.line());
        let field = |i: usize| -> Result<f64, StoreError> {
            let raw = &record[i];
            let x: f64 = raw.parse().map_err(|_| StoreError::MalformedRow {
                row,
                reason: format!("{raw:?} is not a number"),
            })?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(StoreError::MalformedRow {
                    row,
                    reason: format!("non-finite value {raw:?}"),
                })
            }
        };
        let (t, v) = (field(0)?, field(1)?);
        if let Some(prev) = previous {
            if t < prev {
                return Err(StoreError::OutOfOrder { row, t, previous: prev });
            }
        }
        previous = Some(t);
        points.push(DataPoint::new(t, v));
    }
    Ok(points)
}

fn csv_error(e: csv::Error, fallback_row: u64) -> StoreError {
    let row = e.position().map_or(fallback_row, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Utf8 { .. } => StoreError::Encoding { row },
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => StoreError::Io(io),
            _ => unreachable!(),
        },
        _ => StoreError::MalformedRow {
            row,
            reason: e.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (tempfile::TempDir, Store) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        (dir, store)
    }

    #[test]
    fn csv_write_read_round_trip() {
        let series = Series::new(vec![
            DataPoint::new(0.1 + 0.2, 1.0 / 3.0),
            DataPoint::new(1e300, -0.0),
            DataPoint::new(1e300, 5e-324),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&series, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        for (a, b) in back.iter().zip(series.iter()) {
            assert_eq!((a.t.to_bits(), a.v.to_bits()), (b.t.to_bits(), b.v.to_bits()));
        }
        assert_eq!(read_csv("t,v\n".as_bytes()).unwrap().len(), 0);
        assert!(read_csv("t,v\n2,0\n1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn ingest_examples() {
        let (_d, s) = store();
        assert_eq!(s.ingest_csv("a", "t,v\n0,1\n1,2\n".as_bytes()).unwrap(), 2);
        assert_eq!(s.ingest_csv("b", "t,v\n".as_bytes()).unwrap(), 0);
        let err = s.ingest_csv("c", "t,v\n0,1\n2,NaN\n".as_bytes()).unwrap_err();
        assert!(matches!(err, StoreError::MalformedRow { row: 3, .. }), "{err}");
        assert!(!s.contains("c"));
    }

    #[test]
    fn ingest_formats_and_errors() {
        let (_d, s) = store();
        let n = s.ingest_csv("x", "t,v\r\n1e0,2.5E1\r\n2, -3\r\n".as_bytes()).unwrap();
        assert_eq!(n, 2);
        assert_eq!(
            s.read_raw("x", 0.0, 10.0).unwrap().points(),
            &[DataPoint::new(1.0, 25.0), DataPoint::new(2.0, -3.0)]
        );
        assert!(matches!(
            s.ingest_csv("x", "t,v\n1.5,0\n".as_bytes()),
            Err(StoreError::OutOfOrder { row: 2, .. })
        ));
        assert!(matches!(
            s.ingest_csv("x", "t,v\n5,1\n4,1\n".as_bytes()),
            Err(StoreError::OutOfOrder { row: 3, .. })
        ));
        assert!(matches!(
            s.ingest_csv("x", "time,value\n".as_bytes()),
            Err(StoreError::BadHeader(_))
        ));
        assert!(matches!(
            s.ingest_csv("x", "t,v\n5,1,7\n".as_bytes()),
            Err(StoreError::MalformedRow { row: 2, .. })
        ));
        assert!(matches!(
            s.ingest_csv("x", "t,v\n5,abc\n".as_bytes()),
            Err(StoreError::MalformedRow { row: 2, .. })
        ));
        assert!(matches!(
            s.ingest_csv("x", "t,v\n5,inf\n".as_bytes()),
            Err(StoreError::MalformedRow { row: 2, .. })
        ));
        assert!(matches!(
            s.ingest_csv("x", &b"t,v\n5,\xff\xfe\n"[..]),
            Err(StoreError::Encoding { row: 2 })
        ));
        assert!(matches!(
            s.ingest_csv("../evil", "t,v\n".as_bytes()),
            Err(StoreError::InvalidSeriesId(_))
        ));
        // Nothing from the failed bodies was committed.
        assert_eq!(s.catalog_entry("x").unwrap().raw_count, 2);
    }

    #[test]
    fn raw_round_trip_is_bit_exact() {
        let (_d, s) = store();
        let pts: Vec<DataPoint> = (0..1000)
            .map(|i| DataPoint::new(i as f64 * 0.1 + 1e-13, (i as f64).sin() * 1e-300 + 0.1))
            .collect();
        let body: String = std::iter::once("t,v\n".to_string())
            .chain(pts.iter().map(|p| format!("{},{}\n", p.t, p.v)))
            .collect();
        s.ingest_csv("r", body.as_bytes()).unwrap();
        let back = s.read_raw("r", f64::MIN, f64::MAX).unwrap();
        for (a, b) in back.iter().zip(&pts) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.v.to_bits(), b.v.to_bits());
        }
        assert_eq!(back.len(), pts.len());
        let mid = s.read_raw("r", 10.0, 20.0).unwrap();
        assert!(mid.iter().all(|p| p.t >= 10.0 && p.t < 20.0));
        assert_eq!(mid.len(), 100);
        assert!(s.read_raw("r", 5.0, 5.0).unwrap().is_empty());
        assert!(matches!(s.read_raw("nope", 0.0, 1.0), Err(StoreError::UnknownSeries(_))));
    }

    fn segment(k: i64) -> Segment {
        Segment {
            series_id: "s".into(),
            batch_index: k,
            t_start: k as f64,
            t_end: k as f64 + 1.0,
            v_min: -1.5,
            v_max: 2.25,
            passes_used: 2,
            retained: vec![DataPoint::new(k as f64 + 0.1, 1.0 / 3.0)],
            raw_count: 10,
            pass_diagonals: vec![1.0, std::f64::consts::SQRT_2],
        }
    }

    #[test]
    fn segment_round_trip_and_replace() {
        let (_d, s) = store();
        s.ingest_csv("s", "t,v\n0,1\n".as_bytes()).unwrap();
        for k in 0..4 {
            s.write_segment(&segment(k)).unwrap();
        }
        let got = s.read_segments("s", 0.5, 2.5).unwrap();
        assert_eq!(got.iter().map(|g| g.batch_index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(got[1], segment(1));

        let mut newer = segment(1);
        newer.retained.clear();
        newer.raw_count = 0;
        s.write_segment(&newer).unwrap();
        assert_eq!(s.read_segments("s", 1.0, 2.0).unwrap(), vec![newer]);
        assert!(s.read_segments("s", 10.0, 20.0).unwrap().is_empty());
        assert!(s.read_segments("s", 1.0, 1.0).unwrap().is_empty());
        assert_eq!(s.segment_count("s").unwrap(), 4);
        // No temp files left behind.
        let leftovers = fs::read_dir(s.root().join("s").join(SEGMENT_DIR))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp"))
            .count();
        assert_eq!(leftovers, 0);
    }

    #[test]
    fn segment_header_floats_are_bit_exact() {
        let (_d, s) = store();
        s.ingest_csv("s", "t,v\n0,1\n".as_bytes()).unwrap();
        let mut seg = segment(0);
        seg.v_max = 99.99992779431417;
        seg.v_min = 0.1 + 0.2;
        seg.pass_diagonals = vec![std::f64::consts::SQRT_2, 1.0 / 3.0];
        s.write_segment(&seg).unwrap();
        let back = &s.read_segments("s", 0.0, 1.0).unwrap()[0];
        assert_eq!(back.v_max.to_bits(), seg.v_max.to_bits());
        assert_eq!(back.v_min.to_bits(), seg.v_min.to_bits());
        assert_eq!(back.pass_diagonals, seg.pass_diagonals);
    }

    #[test]
    fn corrupt_segment_is_reported() {
        let (_d, s) = store();
        s.ingest_csv("s", "t,v\n0,1\n".as_bytes()).unwrap();
        s.write_segment(&segment(0)).unwrap();
        let path = s.root().join("s").join(SEGMENT_DIR).join("0.seg");
        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            s.read_segments("s", 0.0, 1.0),
            Err(StoreError::Corrupt { .. })
        ));
    }

    #[test]
    fn preprocess_and_catalog() {
        let (_d, s) = store();
        assert!(s.list_series().unwrap().is_empty());
        let body: String = std::iter::once("t,v\n".to_string())
            .chain((0..500).map(|i| format!("{},{}\n", i as f64 * 0.01, (i % 13) as f64)))
            .collect();
        s.ingest_csv("p", body.as_bytes()).unwrap();
        let cfg = BatchConfig::new(1.0, 2, 5).unwrap();
        let report = s.preprocess("p", &cfg).unwrap();
        assert_eq!(report.segment_count, 5);
        let entry = s.catalog_entry("p").unwrap();
        assert_eq!(entry.segment_count, 5);
        assert_eq!(entry.preprocess_config, Some(cfg));
        assert_eq!(entry.raw_count, 500);
        assert_eq!(entry.t_max, Some(4.99));
        assert_eq!(s.read_segments("p", 0.0, 5.0).unwrap().len(), 5);
        assert_eq!(s.read_segments("p", -1e15, 1e15).unwrap().len(), 5);
        assert_eq!(s.read_segments("p", 2.5, 3.0).unwrap()[0].batch_index, 2);

        // New raw data invalidates segments.
        s.ingest_csv("p", "t,v\n6,1\n".as_bytes()).unwrap();
        let entry = s.catalog_entry("p").unwrap();
        assert_eq!(entry.segment_count, 0);
        assert_eq!(entry.preprocess_config, None);
        assert_eq!(s.list_series().unwrap().len(), 1);
        assert!(matches!(s.preprocess("q", &cfg), Err(StoreError::UnknownSeries(_))));
        s.ingest_csv("empty", "t,v\n".as_bytes()).unwrap();
        assert!(matches!(s.preprocess("empty", &cfg), Err(StoreError::NoData(_))));
    }

    #[test]
    fn interrupted_append_tail_is_discarded() {
        let (_d, s) = store();
        s.ingest_csv("a", "t,v\n0,1\n".as_bytes()).unwrap();
        let raw = s.root().join("a").join(RAW_FILE);
        let mut f = OpenOptions::new().append(true).open(&raw).unwrap();
        f.write_all(&[7u8; 11]).unwrap();
        assert_eq!(s.read_raw("a", 0.0, 10.0).unwrap().len(), 1);
        s.ingest_csv("a", "t,v\n1,2\n".as_bytes()).unwrap();
        assert_eq!(
            s.read_raw("a", 0.0, 10.0).unwrap().points(),
            &[DataPoint::new(0.0, 1.0), DataPoint::new(1.0, 2.0)]
        );
    }
}
