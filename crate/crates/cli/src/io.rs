use std::fs;
use std::path::Path;

use tski::{Error, Matrix};

use crate::CliError;

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Numeric CSV with a header row.
pub struct Table {
    pub names: Vec<String>,
    pub data: Matrix<f64>,
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_table(&bytes)
}

pub fn parse_table(bytes: &[u8]) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(1, 0, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row_no = i + 2;
        let rec = rec.map_err(|e| malformed(row_no, 0, e.to_string()))?;
        let row: Vec<f64> = rec
            .iter()
            .enumerate()
            .map(|(j, c)| {
                c.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| malformed(row_no, j + 1, format!("not a finite number: {c:?}")))
            })
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() || names.is_empty() {
        return Err(CliError::from(Error::EmptyData));
    }
    let data = Matrix::from_rows(&rows)?;
    Ok(Table { names, data })
}

fn malformed(row: usize, col: usize, msg: String) -> CliError {
    CliError::from(Error::MalformedCsv { row, col, msg })
}

pub fn matrix_csv(names: &[String], m: &Matrix<f64>) -> String {
    let mut out = names.join(",");
    out.push('\n');
    for i in 0..m.rows() {
        let cells: Vec<String> = m.row(i).iter().map(|&v| fmt_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Square matrix from a headerless CSV.
pub fn read_square(path: &Path) -> Result<Matrix<f64>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(&bytes[..]);
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| malformed(i + 1, 0, e.to_string()))?;
        let row: Vec<f64> = rec
            .iter()
            .enumerate()
            .map(|(j, c)| c.trim().parse::<f64>().map_err(|_| malformed(i + 1, j + 1, format!("not a number: {c:?}"))))
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    let m = Matrix::from_rows(&rows)?;
    if m.rows() != m.cols() || m.rows() == 0 {
        return Err(CliError::Config(format!("covariance must be square, got {}x{}", m.rows(), m.cols())));
    }
    Ok(m)
}

pub fn write_output(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}
