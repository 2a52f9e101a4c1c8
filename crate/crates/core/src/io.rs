//! CSV input and output.
//!
//! Data files have a header row of variable names followed by one row per
//! sample. Cells must be non-negative numbers; `0` marks a rounded zero.
//! A detection-limit file has the same header and a single row, where an
//! empty cell means the variable has no limit.
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! reading a written file gives back the same bits.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::bench::quantile;
use crate::coda::{CompositionMatrix, DetectionLimits};
use crate::error::{Error, Result};

/// A numeric table with its column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub values: Array2<f64>,
}

fn input_error(path: &Path, msg: impl Into<String>) -> Error {
    Error::Input {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn read_header(path: &Path, rdr: &mut csv::Reader<File>) -> Result<Vec<String>> {
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| input_error(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(input_error(path, "missing header row"));
    }
    Ok(header)
}

/// Reads a table of finite, non-negative numbers.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = open(path)?;
    let header = read_header(path, &mut rdr)?;
    let d = header.len();
    let mut data = Vec::new();
    let mut nrows = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| input_error(path, format!("data row {}: {e}", r + 1)))?;
        for (c, cell) in record.iter().enumerate() {
            data.push(parse_cell(path, cell, r, &header[c])?);
        }
        nrows += 1;
    }
    if nrows == 0 {
        return Err(input_error(path, "no data rows"));
    }
    let values = Array2::from_shape_vec((nrows, d), data).expect("record lengths checked by csv");
    Ok(Table { header, values })
}

fn parse_cell(path: &Path, cell: &str, row: usize, name: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| {
        input_error(path, format!("data row {}, column {name:?}: {cell:?} is not a number", row + 1))
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(input_error(
            path,
            format!("data row {}, column {name:?}: {cell} is not a finite non-negative number", row + 1),
        ));
    }
    Ok(v)
}

/// Reads a composition whose zero cells are rounded zeros.
///
/// Rows or columns that are entirely zero look like structural zeros, which
/// cannot be imputed, and are rejected.
pub fn read_composition(path: &Path) -> Result<(Vec<String>, CompositionMatrix)> {
    let table = read_table(path)?;
    reject_structural_zeros(path, &table)?;
    let x = CompositionMatrix::from_zeros(table.values)
        .map_err(|e| input_error(path, e.to_string()))?;
    Ok((table.header, x))
}

fn reject_structural_zeros(path: &Path, table: &Table) -> Result<()> {
    for (i, row) in table.values.rows().into_iter().enumerate() {
        if row.iter().all(|&v| v == 0.0) {
            return Err(input_error(
                path,
                format!(
                    "data row {} is all zeros; structural zeros are not supported, drop the row",
                    i + 1
                ),
            ));
        }
    }
    for (j, col) in table.values.columns().into_iter().enumerate() {
        if col.iter().all(|&v| v == 0.0) {
            return Err(input_error(
                path,
                format!(
                    "column {:?} is all zeros; structural zeros are not supported, drop the column",
                    table.header[j]
                ),
            ));
        }
    }
    Ok(())
}

/// Reads a one-row detection-limit file whose header matches `header`.
pub fn read_limits(path: &Path, header: &[String]) -> Result<DetectionLimits> {
    let mut rdr = open(path)?;
    let own = read_header(path, &mut rdr)?;
    if own != header {
        return Err(input_error(
            path,
            format!("header {own:?} does not match the data header {header:?}"),
        ));
    }
    let mut records = rdr.records();
    let record = match records.next() {
        Some(r) => r.map_err(|e| input_error(path, e.to_string()))?,
        None => return Err(input_error(path, "no limit row")),
    };
    if records.next().is_some() {
        return Err(input_error(path, "expected exactly one limit row"));
    }
    let limits = record
        .iter()
        .zip(header)
        .map(|(cell, name)| {
            if cell.is_empty() {
                return Ok(None);
            }
            let v = parse_cell(path, cell, 0, name)?;
            if v == 0.0 {
                return Err(input_error(path, format!("column {name:?}: limit must be positive")));
            }
            Ok(Some(v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DetectionLimits::new(limits))
}

/// Limits taken as the `q`-quantile of each censored column's observed values.
pub fn limits_from_quantile(x: &CompositionMatrix, q: f64) -> Result<DetectionLimits> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Config(format!("quantile {q} is outside (0, 1)")));
    }
    let limits = (0..x.nparts())
        .map(|j| {
            if x.masked_in_column(j) == 0 {
                return None;
            }
            let observed: Vec<f64> = x.observed_rows(j).iter().map(|&i| x.values()[[i, j]]).collect();
            quantile(&observed, q)
        })
        .collect();
    Ok(DetectionLimits::new(limits))
}

/// Formats a table as CSV text.
pub fn table_to_string(header: &[String], values: &Array2<f64>) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::Numerical(format!("csv encoding failed: {e}"));
    wtr.write_record(header).map_err(io_err)?;
    for row in values.rows() {
        wtr.write_record(row.iter().map(|v| v.to_string())).map_err(io_err)?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::Numerical(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

pub fn write_table(path: &Path, header: &[String], values: &Array2<f64>) -> Result<()> {
    write_text(path, &table_to_string(header, values)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = File::create(path).map_err(io_err)?;
    file.write_all(text.as_bytes()).map_err(io_err)
}
