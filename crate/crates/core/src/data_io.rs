//! CSV and JSON input/output, plus synthetic dataset generation.
//!
//! Raw data files hold one integer per cell under a header row of attribute
//! names. Anonymized files hold `[lo,hi]` cells, or `*` for suppressed
//! records. Interval cells contain a comma, so they are written quoted.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_traits::ToPrimitive;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anonymizer::{AnonymizeError, AnonymizedDataset, Dataset};
use crate::domain::{DomainError, HierarchySpec, Interval, Segment, SegmentGrid};
use crate::release::Release;

pub const FORMAT_VERSION: u32 = 1;
pub const SUPPRESSED: &str = "*";

#[derive(Debug, Error)]
pub enum DataIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("line {line}, column {column}: {message}")]
    Parse { line: u64, column: usize, message: String },
    #[error("header {found:?} does not match attributes {expected:?}")]
    HeaderMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("attribute {attribute} contains the value {value} more than once")]
    DuplicateValues { attribute: String, value: i64 },
    #[error("record {record}: value {value} of {attribute} lies outside its domain")]
    OutOfDomain { record: usize, attribute: String, value: i64 },
    #[error("attribute {attribute} has {size} values, fewer than the {n} distinct values needed")]
    DomainTooSmall { attribute: String, size: u64, n: usize },
    #[error("line {line}, column {column}: {cell} is not a node of the hierarchy")]
    UnknownInterval { line: u64, column: usize, cell: String },
    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("metadata disagrees with the data file: {0}")]
    MetadataMismatch(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Anonymize(#[from] AnonymizeError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataIoError + '_ {
    move |source| DataIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<File, DataIoError> {
    File::open(path).map_err(io_err(path))
}

fn create(path: &Path) -> Result<File, DataIoError> {
    File::create(path).map_err(io_err(path))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    Uniform,
    /// Value rank `floor(u² · L)` for uniform `u`, skewed towards the low end.
    Skewed,
}

/// Attributes and sampling parameters of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub attributes: Vec<HierarchySpec>,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub distribution: Distribution,
}

impl DatasetConfig {
    pub fn new(attributes: Vec<HierarchySpec>, n: usize) -> Self {
        Self {
            name: None,
            attributes,
            n,
            k: None,
            seed: None,
            distribution: Distribution::Uniform,
        }
    }

    pub fn load(path: &Path) -> Result<Self, DataIoError> {
        let config: Self = serde_json::from_reader(open(path)?)?;
        if config.attributes.is_empty() {
            return Err(DataIoError::Config("no attributes".into()));
        }
        config.grid()?;
        Ok(config)
    }

    pub fn grid(&self) -> Result<SegmentGrid, DomainError> {
        SegmentGrid::from_specs(&self.attributes)
    }

    pub fn names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }
}

fn names_of(grid: &SegmentGrid) -> Vec<String> {
    grid.hierarchies().iter().map(|h| h.name().to_string()).collect()
}

fn check_header(headers: &csv::StringRecord, grid: &SegmentGrid) -> Result<(), DataIoError> {
    let found: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    let expected = names_of(grid);
    if found != expected {
        return Err(DataIoError::HeaderMismatch { expected, found });
    }
    Ok(())
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Moves repeated values of each attribute to the nearest value not present
/// in the column, searching `v+1, v-1, v+2, v-2, …` inside the domain.
pub fn jitter(records: &mut [Vec<i64>], grid: &SegmentGrid) -> Result<(), DataIoError> {
    let n = records.len();
    for (axis, h) in grid.hierarchies().iter().enumerate() {
        let dom = h.domain();
        let mut used: HashSet<i64> = records.iter().map(|r| r[axis]).collect();
        let mut kept: HashSet<i64> = HashSet::with_capacity(records.len());
        for r in records.iter_mut() {
            let v = r[axis];
            if kept.insert(v) {
                continue;
            }
            let span = dom.len() as i64;
            let replacement = (1..span)
                .flat_map(|d| [v + d, v - d])
                .find(|c| dom.contains(*c) && !used.contains(c))
                .ok_or_else(|| DataIoError::DomainTooSmall {
                    attribute: h.name().to_string(),
                    size: dom.len(),
                    n,
                })?;
            used.insert(replacement);
            kept.insert(replacement);
            r[axis] = replacement;
        }
    }
    Ok(())
}

/// Parses a raw CSV and checks it against the grid.
pub fn read_csv<R: Read>(reader: R, grid: &SegmentGrid, jitter_duplicates: bool) -> Result<Dataset, DataIoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, grid)?;
    let names = names_of(grid);
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        if row.len() != grid.dims() {
            return Err(DataIoError::MalformedRow {
                line,
                message: format!("expected {} cells, found {}", grid.dims(), row.len()),
            });
        }
        let mut record = Vec::with_capacity(row.len());
        for (column, cell) in row.iter().enumerate() {
            let value: i64 = cell.parse().map_err(|_| DataIoError::Parse {
                line,
                column: column + 1,
                message: format!("{cell:?} is not an integer"),
            })?;
            record.push(value);
        }
        records.push(record);
    }
    for (i, r) in records.iter().enumerate() {
        if let Err(DomainError::OutOfDomain { attribute, value }) = grid.check_record(r) {
            return Err(DataIoError::OutOfDomain {
                record: i,
                attribute: names[attribute].clone(),
                value,
            });
        }
    }
    if jitter_duplicates {
        jitter(&mut records, grid)?;
    }
    let data = Dataset::new(names.clone(), records)?;
    match data.validate(grid) {
        Err(AnonymizeError::DuplicateValues { attribute, value }) => Err(DataIoError::DuplicateValues {
            attribute: names[attribute].clone(),
            value,
        }),
        other => other.map(|_| data).map_err(Into::into),
    }
}

pub fn load_csv(path: &Path, grid: &SegmentGrid, jitter_duplicates: bool) -> Result<Dataset, DataIoError> {
    read_csv(open(path)?, grid, jitter_duplicates)
}

pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<(), DataIoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data.names())?;
    for r in data.records() {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| DataIoError::Csv(e.into()))?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: &Path) -> Result<(), DataIoError> {
    write_csv(data, create(path)?)
}

/// `n` records with distinct values per attribute, deterministic in `seed`.
pub fn generate_synthetic(config: &DatasetConfig, seed: u64) -> Result<Dataset, DataIoError> {
    let grid = config.grid()?;
    let n = config.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = Vec::with_capacity(grid.dims());
    for h in grid.hierarchies() {
        let dom = h.domain();
        let size = dom.len();
        if (size as u128) < n as u128 {
            return Err(DataIoError::DomainTooSmall {
                attribute: h.name().to_string(),
                size,
                n,
            });
        }
        let offsets: Vec<u64> = match config.distribution {
            Distribution::Uniform => sample(&mut rng, size as usize, n).into_iter().map(|i| i as u64).collect(),
            Distribution::Skewed => {
                let mut seen = HashSet::with_capacity(n);
                let mut out = Vec::with_capacity(n);
                while out.len() < n {
                    let u: f64 = rng.gen();
                    let idx = ((u * u * size as f64) as u64).min(size - 1);
                    if seen.insert(idx) {
                        out.push(idx);
                    }
                }
                out
            }
        };
        columns.push(offsets.into_iter().map(|o| dom.lo + o as i64).collect::<Vec<_>>());
    }
    let records = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    Ok(Dataset::new(names_of(&grid), records)?)
}

/// Per-class bookkeeping stored next to an anonymized file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetadata {
    pub state: Vec<u32>,
    pub intervals: Vec<String>,
    pub size: usize,
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_exact: Option<String>,
    pub c1: u32,
    pub c2: f64,
    pub formation_iteration: usize,
    pub member_row_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: u32,
    pub k: usize,
    pub hierarchies: Vec<HierarchySpec>,
    pub classes: Vec<ClassMetadata>,
    pub outlier_row_indices: Vec<usize>,
}

impl Metadata {
    pub fn of(anon: &AnonymizedDataset) -> Self {
        let classes = anon
            .classes
            .iter()
            .map(|c| ClassMetadata {
                state: c.state.layers().to_vec(),
                intervals: anon.grid.intervals(&c.segment).iter().map(|iv| iv.to_string()).collect(),
                size: c.size(),
                loss: c.loss.decimal(),
                loss_exact: c.loss.exact().map(|r| r.to_string()),
                c1: c.criteria.c1,
                c2: c.criteria.c2.to_f64().unwrap_or(f64::NAN),
                formation_iteration: c.iteration,
                member_row_indices: c.members.clone(),
            })
            .collect();
        Self {
            version: FORMAT_VERSION,
            k: anon.k,
            hierarchies: anon.grid.hierarchies().iter().map(|h| h.spec()).collect(),
            classes,
            outlier_row_indices: anon.outliers.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, DataIoError> {
        Ok(serde_json::from_reader(open(path)?)?)
    }

    /// Checks that the metadata describes `release`.
    pub fn check(&self, release: &Release) -> Result<(), DataIoError> {
        let mismatch = |m: &str| Err(DataIoError::MetadataMismatch(m.to_string()));
        if self.k != release.k {
            return mismatch("k differs");
        }
        if self.hierarchies != release.grid.hierarchies().iter().map(|h| h.spec()).collect::<Vec<_>>() {
            return mismatch("hierarchies differ");
        }
        if self.outlier_row_indices != release.outlier_rows {
            return mismatch("suppressed rows differ");
        }
        if self.classes.len() != release.classes.len() {
            return mismatch("class count differs");
        }
        for c in &self.classes {
            let intervals: Vec<String> = c.intervals.clone();
            let found = release.classes.iter().find(|rc| {
                release.grid.intervals(&rc.segment).iter().map(|iv| iv.to_string()).collect::<Vec<_>>() == intervals
            });
            match found {
                Some(rc) if rc.size == c.size && rc.rows == c.member_row_indices => {}
                _ => return mismatch(&format!("class {intervals:?} not found in the data file")),
            }
        }
        Ok(())
    }
}

pub fn write_release<W: Write>(release: &Release, writer: W) -> Result<(), DataIoError> {
    let grid = &release.grid;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(names_of(grid))?;
    for row in release.rows() {
        match row {
            Some(seg) => w.write_record(grid.intervals(&seg).iter().map(|iv| iv.to_string()))?,
            None => w.write_record(vec![SUPPRESSED; grid.dims()])?,
        }
    }
    w.flush().map_err(|e| DataIoError::Csv(e.into()))?;
    Ok(())
}

/// Writes the data file (rows in input order) and its metadata document.
pub fn write_anonymized(anon: &AnonymizedDataset, data_path: &Path, meta_path: &Path) -> Result<(), DataIoError> {
    write_release(&anon.release(), create(data_path)?)?;
    let meta = create(meta_path)?;
    serde_json::to_writer_pretty(meta, &Metadata::of(anon))?;
    Ok(())
}

/// Glues back cells that were split at the comma inside an unquoted `[lo,hi]`.
fn rejoin(row: &csv::StringRecord) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(row.len());
    let mut open = false;
    for cell in row.iter() {
        if open {
            let last = out.last_mut().expect("open cell");
            last.push(',');
            last.push_str(cell);
        } else {
            out.push(cell.to_string());
        }
        let last = out.last().expect("cell pushed");
        open = last.starts_with('[') && !last.ends_with(']');
    }
    out
}

/// Reads an anonymized data file into the attacker's view. Only the
/// intervals, `k`, and the hierarchies are used.
pub fn read_release<R: Read>(reader: R, grid: &SegmentGrid, k: usize) -> Result<Release, DataIoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    check_header(rdr.headers()?, grid)?;
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let cells = rejoin(&row);
        if cells.len() != grid.dims() {
            return Err(DataIoError::MalformedRow {
                line,
                message: format!("expected {} cells, found {}", grid.dims(), cells.len()),
            });
        }
        let suppressed = cells.iter().filter(|c| *c == SUPPRESSED).count();
        if suppressed == cells.len() {
            rows.push(None);
            continue;
        }
        if suppressed > 0 {
            return Err(DataIoError::MalformedRow {
                line,
                message: "partially suppressed row".into(),
            });
        }
        let mut nodes = Vec::with_capacity(cells.len());
        for (column, (cell, h)) in cells.iter().zip(grid.hierarchies()).enumerate() {
            let unknown = || DataIoError::UnknownInterval {
                line,
                column: column + 1,
                cell: cell.clone(),
            };
            let iv = Interval::parse(cell).ok_or_else(unknown)?;
            nodes.push(h.node_of(iv).ok_or_else(unknown)?);
        }
        rows.push(Some(Segment::new(nodes)));
    }
    Ok(Release::from_rows(grid.clone(), k, rows))
}

pub fn read_anonymized(data_path: &Path, grid: &SegmentGrid, k: usize) -> Result<Release, DataIoError> {
    read_release(open(data_path)?, grid, k)
}
