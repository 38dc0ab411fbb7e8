//! CSV and JSON output.
//!
//! Paths are written as CSV with the time in the first column and the
//! row-major entries of each sample in the remaining columns. Numbers use 17
//! significant digits in lowercase scientific notation so that doubles
//! round-trip exactly and repeated runs produce identical bytes. Each path
//! CSV has a JSON sidecar with its dimensions and the solver settings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path as FsPath;

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::options::SolverOptions;
use crate::path::{MatrixPath, Path, PathValue, VectorPath};

/// Version stamped into every JSON document written by the crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Lossless, deterministic formatting of one double.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn serialize_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect();
    rows.serialize(s)
}

trait RowMajor {
    fn row_major(&self) -> Vec<f64>;
}

impl RowMajor for DMatrix<f64> {
    fn row_major(&self) -> Vec<f64> {
        (0..self.nrows())
            .flat_map(|i| self.row(i).iter().copied().collect::<Vec<_>>())
            .collect()
    }
}

impl RowMajor for DVector<f64> {
    fn row_major(&self) -> Vec<f64> {
        self.iter().copied().collect()
    }
}

fn path_csv<V: PathValue + RowMajor>(path: &Path<V>, prefix: &str) -> String {
    let (rows, cols) = path.shape();
    let mut out = String::from("t");
    for i in 0..rows {
        for j in 0..cols {
            if cols == 1 {
                let _ = write!(out, ",{prefix}_{i}");
            } else {
                let _ = write!(out, ",{prefix}_{i}_{j}");
            }
        }
    }
    out.push('\n');
    for (t, v) in path.grid().iter().zip(path.values()) {
        out.push_str(&format_f64(*t));
        for x in v.row_major() {
            out.push(',');
            out.push_str(&format_f64(x));
        }
        out.push('\n');
    }
    out
}

pub fn matrix_path_csv(path: &MatrixPath, prefix: &str) -> String {
    path_csv(path, prefix)
}

pub fn vector_path_csv(path: &VectorPath, prefix: &str) -> String {
    path_csv(path, prefix)
}

/// Several vector paths on one grid side by side (e.g. `y`, `u`, `lambda`).
pub fn joint_csv(columns: &[(&str, &VectorPath)]) -> Result<String> {
    let first = columns
        .first()
        .ok_or_else(|| Error::Internal("no columns".into()))?
        .1;
    for (_, p) in columns {
        crate::path::same_grid(first.grid(), p.grid())?;
    }
    let mut out = String::from("t");
    for (name, p) in columns {
        for i in 0..p.dim() {
            let _ = write!(out, ",{name}_{i}");
        }
    }
    out.push('\n');
    for (k, t) in first.grid().iter().enumerate() {
        out.push_str(&format_f64(*t));
        for (_, p) in columns {
            for x in p.values()[k].iter() {
                out.push(',');
                out.push_str(&format_f64(*x));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Header, time column and remaining numeric columns of a path CSV.
pub type CsvTable = (Vec<String>, Vec<f64>, Vec<Vec<f64>>);

/// Parses a path CSV back into `(header, times, rows)`.
pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Internal("empty CSV".into()))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let mut fields = line.split(',').map(|f| {
            f.parse::<f64>()
                .map_err(|e| Error::Internal(format!("bad number {f:?}: {e}")))
        });
        times.push(fields.next().transpose()?.unwrap_or(f64::NAN));
        rows.push(fields.collect::<Result<Vec<f64>>>()?);
    }
    Ok((header, times, rows))
}

#[derive(Clone, Debug, Serialize)]
pub struct PathMetadata {
    pub schema_version: u32,
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub samples: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Set when the path covers exactly one period.
    pub period: Option<f64>,
    pub solver: SolverOptions,
}

impl PathMetadata {
    pub fn for_path<V: PathValue>(name: &str, path: &Path<V>, period: Option<f64>, solver: &SolverOptions) -> Self {
        let (rows, cols) = path.shape();
        PathMetadata {
            schema_version: SCHEMA_VERSION,
            name: name.to_owned(),
            rows,
            cols,
            samples: path.len(),
            t_start: path.start(),
            t_end: path.end(),
            period,
            solver: *solver,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &FsPath, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::uniform_grid;
    use proptest::prelude::*;

    #[test]
    fn number_format_is_seventeen_digits() {
        assert_eq!(format_f64(1.0), "1.0000000000000000e0");
        assert_eq!(format_f64(-0.125), "-1.2500000000000000e-1");
        assert_eq!(format_f64(0.1).len(), "1.0000000000000001e-1".len());
    }

    #[test]
    fn matrix_csv_is_row_major() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let p = MatrixPath::from_samples(vec![0.0, 1.0], vec![m.clone(), m]).unwrap();
        let csv = matrix_path_csv(&p, "p");
        let (header, times, rows) = parse_csv(&csv).unwrap();
        assert_eq!(header, ["t", "p_0_0", "p_0_1", "p_1_0", "p_1_1"]);
        assert_eq!(times, vec![0.0, 1.0]);
        assert_eq!(rows[0], vec![1.0, 2.0, 3.0, 4.0]);
    }

    proptest! {
        #[test]
        fn csv_round_trips_doubles(xs in prop::collection::vec(-1e300f64..1e300, 2..20)) {
            let grid = uniform_grid(0.0, 1.0, 1.0 / (xs.len() - 1) as f64);
            prop_assume!(grid.len() == xs.len());
            let p = VectorPath::scalar(grid, &xs).unwrap();
            let (_, _, rows) = parse_csv(&vector_path_csv(&p, "x")).unwrap();
            let back: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            prop_assert_eq!(back, xs);
        }
    }
}
