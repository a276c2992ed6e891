//! Points, datasets, cluster assignments and CSV I/O.
//!
//! Everything downstream (bounds, perturbation, the protocol itself) works on
//! a [`Dataset`]: an ordered list of uniquely-identified points of one shared
//! dimension. Coordinates are plain `f64`; the perturbation analysis assumes
//! non-negative data, which [`translate_non_negative`] establishes by
//! subtracting the per-dimension minimum.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One record: a stable id plus its coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub id: u64,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(id: u64, coords: Vec<f64>) -> Self {
        Point { id, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// An owned collection of points, all of one dimension, with unique ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<Point>,
}

impl Dataset {
    /// Builds a dataset, enforcing the structural invariants: at least one
    /// point, a uniform dimension, and unique ids.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyDataset)?;
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::InvalidParameter("points must have at least one dimension".into()));
        }
        let mut seen = std::collections::HashSet::with_capacity(points.len());
        for p in &points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
            }
            if !seen.insert(p.id) {
                return Err(Error::DuplicateId(p.id));
            }
        }
        Ok(Dataset { points })
    }

    /// Convenience constructor for tests and fixtures: ids are row indices.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            rows.into_iter()
                .enumerate()
                .map(|(i, coords)| Point::new(i as u64, coords))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Per-dimension minima over the whole dataset.
    pub fn min_per_dim(&self) -> Vec<f64> {
        let mut mins = vec![f64::INFINITY; self.dim()];
        for p in &self.points {
            for (m, &c) in mins.iter_mut().zip(&p.coords) {
                if c < *m {
                    *m = c;
                }
            }
        }
        mins
    }

    /// Per-dimension maxima over the whole dataset.
    pub fn max_per_dim(&self) -> Vec<f64> {
        let mut maxs = vec![f64::NEG_INFINITY; self.dim()];
        for p in &self.points {
            for (m, &c) in maxs.iter_mut().zip(&p.coords) {
                if c > *m {
                    *m = c;
                }
            }
        }
        maxs
    }
}

/// Map from point id to cluster index (0-based, dense in `[0, k)`).
///
/// Stored as a `BTreeMap` so iteration, serialization and CSV export are all
/// canonical (sorted by id), which keeps transcripts byte-stable.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: BTreeMap<u64, usize>,
}

impl ClusterAssignment {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, usize)>) -> Self {
        ClusterAssignment { labels: pairs.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<usize> {
        self.labels.get(&id).copied()
    }

    /// Writes the canonical `id,label` CSV (sorted by id, with header).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "id,label")?;
        for (id, label) in &self.labels {
            writeln!(out, "{id},{label}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// An ordered list of k centers sharing one dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentroidSet {
    centers: Vec<Vec<f64>>,
}

impl CentroidSet {
    /// Validates shape: at least one center, all sharing one finite,
    /// non-empty coordinate vector length.
    pub fn new(centers: Vec<Vec<f64>>) -> Result<Self> {
        let dim = centers.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::EmptyDataset);
        }
        for c in &centers {
            if c.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.len() });
            }
        }
        Ok(CentroidSet { centers })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }
}

/// Euclidean distance between two points of equal dimension.
pub fn euclidean_distance(p: &Point, q: &Point) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    Ok(crate::lloyd::squared_distance(&p.coords, &q.coords).sqrt())
}

/// Shifts every dimension so its minimum is exactly 0 and returns the offset
/// that was subtracted (`output = input - offset`, so `input = output +
/// offset` inverts it). Distances are unchanged. Errors on NaN or infinite
/// coordinates, which would poison the minima.
pub fn translate_non_negative(ds: &Dataset) -> Result<(Dataset, Vec<f64>)> {
    for p in ds.points() {
        if let Some(dim) = p.coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { id: p.id, dim });
        }
    }
    let offset = ds.min_per_dim();
    let points = ds
        .points()
        .iter()
        .map(|p| {
            Point::new(p.id, p.coords.iter().zip(&offset).map(|(c, o)| c - o).collect())
        })
        .collect();
    Ok((Dataset { points }, offset))
}

/// How to read a CSV file into a [`Dataset`].
#[derive(Clone, Copy, Debug, Default)]
pub struct CsvSchema {
    /// Skip the first row as a header.
    pub has_header: bool,
    /// Zero-based index of a column holding integer point ids. When absent,
    /// ids are the 0-based data row indices.
    pub id_column: Option<usize>,
}

/// Loads a dataset from CSV. Every non-id cell must parse as a float; rows
/// must all have the same width. Errors carry 1-based row numbers (counting
/// the header row if there is one).
pub fn load_csv(path: &Path, schema: CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true) // width is validated manually so we can report the row
        .from_path(path)
        .map_err(|e| Error::Csv { row: 0, msg: e.to_string() })?;

    let header_rows = usize::from(schema.has_header);
    let mut points = Vec::new();
    let mut width: Option<usize> = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1 + header_rows;
        let record = record.map_err(|e| Error::Csv { row, msg: e.to_string() })?;
        let w = record.len();
        match width {
            None => {
                if let Some(idc) = schema.id_column {
                    if idc >= w {
                        return Err(Error::Csv {
                            row,
                            msg: format!("id column {idc} out of range for {w} columns"),
                        });
                    }
                }
                if w == schema.id_column.map_or(0, |_| 1) {
                    return Err(Error::Csv { row, msg: "no coordinate columns".into() });
                }
                width = Some(w);
            }
            Some(expect) if expect != w => {
                return Err(Error::Csv {
                    row,
                    msg: format!("ragged row: expected {expect} columns, got {w}"),
                });
            }
            _ => {}
        }

        let mut id = i as u64;
        let mut coords = Vec::with_capacity(w - usize::from(schema.id_column.is_some()));
        for (col, cell) in record.iter().enumerate() {
            if Some(col) == schema.id_column {
                id = cell.trim().parse::<u64>().map_err(|_| Error::Csv {
                    row,
                    msg: format!("id column {col}: {cell:?} is not an unsigned integer"),
                })?;
            } else {
                let v = cell.trim().parse::<f64>().map_err(|_| Error::Csv {
                    row,
                    msg: format!("column {col}: {cell:?} is not a number"),
                })?;
                coords.push(v);
            }
        }
        points.push(Point::new(id, coords));
    }
    Dataset::new(points)
}

/// Writes a dataset as CSV with an `id` column and a header, the layout
/// [`load_csv`] reads back verbatim with `has_header + id_column 0`.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> =
        std::iter::once("id".to_string()).chain((0..ds.dim()).map(|j| format!("c{j}"))).collect();
    writeln!(out, "{}", header.join(","))?;
    for p in ds.points() {
        let mut row = p.id.to_string();
        for c in &p.coords {
            // Shortest round-trip float formatting: reloading is lossless.
            row.push(',');
            row.push_str(&format!("{c:?}"));
        }
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}
