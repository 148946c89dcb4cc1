use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::DataMatrix;
use crate::error::{Result, SugarError};

fn io_err(path: &Path, source: std::io::Error) -> SugarError {
    SugarError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> SugarError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => SugarError::InvalidData(format!("{}: {:?}", path.display(), other)),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Reads a numeric CSV. Row numbers in errors are 1-based file lines.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<DataMatrix> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let mut names: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut flat = Vec::new();
    let mut n_rows = 0usize;

    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let row = line + 1;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(SugarError::Ragged {
                    row,
                    found: record.len(),
                    expected: w,
                })
            }
            Some(_) => {}
        }
        if has_header && names.is_none() {
            names = Some(record.iter().map(str::to_owned).collect());
            continue;
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| SugarError::Parse {
                row,
                col: col + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(SugarError::Parse {
                    row,
                    col: col + 1,
                    message: format!("`{cell}` is not finite"),
                });
            }
            flat.push(v);
        }
        n_rows += 1;
    }

    let d = width.unwrap_or(0);
    if n_rows == 0 {
        return Err(SugarError::InvalidData(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let values = Array2::from_shape_vec((n_rows, d), flat)
        .map_err(|e| SugarError::InvalidData(e.to_string()))?;
    let m = DataMatrix::new(values)?;
    match names {
        Some(n) => m.with_col_names(n),
        None => Ok(m),
    }
}

/// True when some cell of the first non-empty line does not parse as a number.
pub fn detect_header(path: impl AsRef<Path>) -> Result<bool> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        return Ok(record.iter().any(|c| c.parse::<f64>().is_err()));
    }
    Ok(false)
}

/// Writes `m` as CSV with shortest round-trip float formatting.
pub fn save_csv(m: &DataMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    if let Some(names) = m.col_names() {
        w.write_record(names).map_err(|e| csv_err(path, e))?;
    }
    let mut buf = Vec::with_capacity(m.cols());
    for row in m.values().outer_iter() {
        buf.clear();
        buf.extend(row.iter().map(|v| format_float(*v)));
        w.write_record(&buf).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn format_float(v: f64) -> String {
    // `-0` would not survive some downstream parsers' equality checks.
    if v == 0.0 {
        "0".to_owned()
    } else {
        format!("{v}")
    }
}

/// Reads one integer label per line; a non-numeric first line is treated as a header.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let mut labels = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let cell = record.get(0).unwrap_or("");
        if cell.is_empty() && record.len() == 1 {
            continue;
        }
        match cell.parse::<usize>() {
            Ok(l) => labels.push(l),
            Err(_) if line == 0 => continue,
            Err(_) => {
                return Err(SugarError::Parse {
                    row: line + 1,
                    col: 1,
                    message: format!("`{cell}` is not a nonnegative integer label"),
                })
            }
        }
    }
    if labels.is_empty() {
        return Err(SugarError::InvalidData(format!(
            "{}: no labels",
            path.display()
        )));
    }
    Ok(labels)
}

pub fn save_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "label").map_err(|e| io_err(path, e))?;
    for l in labels {
        writeln!(w, "{l}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
