use std::fmt;

use serde::{Deserialize, Serialize};

use super::transform::Tcode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Self {
        Self { year, month }
    }

    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + self.month as i64 - 1
    }

    pub fn from_ordinal(k: i64) -> Self {
        Self {
            year: k.div_euclid(12) as i32,
            month: k.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn next(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }

    /// Accepts `m/d/yyyy`, `yyyy-mm-dd` and `yyyy-mm`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        let nums = |parts: Vec<&str>| parts.iter().map(|p| p.trim().parse::<i64>().ok()).collect::<Option<Vec<_>>>();
        let (year, month) = if s.contains('/') {
            let v = nums(s.split('/').collect())?;
            if v.len() != 3 {
                return None;
            }
            (v[2], v[0])
        } else {
            let v = nums(s.split('-').collect())?;
            if !(2..=3).contains(&v.len()) {
                return None;
            }
            (v[0], v[1])
        };
        if !(1..=12).contains(&month) {
            return None;
        }
        Some(Self::new(i32::try_from(year).ok()?, month as u32))
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub tcode: Tcode,
    pub values: Vec<Option<f64>>,
}

/// Monthly panel: consecutive months, one column per series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroPanel {
    pub dates: Vec<Month>,
    pub series: Vec<Series>,
}

impl MacroPanel {
    pub fn shape(&self) -> (usize, usize) {
        (self.dates.len(), self.series.len())
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.series.iter().position(|s| s.name == name)
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "NaN" | "nan" | ".")
}

fn malformed(row: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::MalformedCsv {
        row,
        col,
        msg: msg.into(),
    }
}

/// Parses the FRED-MD layout: a header row (`sasdate`, series codes…), a
/// transform-code row, then one row per month. Rows are numbered from 1.
pub fn parse_panel(bytes: &[u8]) -> Result<MacroPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| malformed(i + 1, 0, e.to_string()))?;
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        rows.push(rec);
    }
    if rows.len() < 2 {
        return Err(malformed(rows.len() + 1, 0, "expected a header row and a transform row"));
    }
    let header = &rows[0];
    let width = header.len();
    if width < 2 {
        return Err(malformed(1, 1, "no series columns"));
    }
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    for (j, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(malformed(1, j + 2, "empty series name"));
        }
        if names[..j].contains(name) {
            return Err(malformed(1, j + 2, format!("duplicate series {name}")));
        }
    }
    let trow = &rows[1];
    if trow.len() != width {
        return Err(malformed(2, trow.len().min(width) + 1, format!("expected {width} cells")));
    }
    let tcodes: Vec<Tcode> = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let cell = trow[j + 1].trim();
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && (1.0..=7.0).contains(v))
                .and_then(|v| Tcode::from_code(v as u8))
                .ok_or_else(|| Error::UnknownTcode {
                    series: name.clone(),
                    code: cell.to_string(),
                })
        })
        .collect::<Result<_>>()?;

    let mut dates = Vec::with_capacity(rows.len() - 2);
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(rows.len() - 2); names.len()];
    for (r, rec) in rows.iter().enumerate().skip(2) {
        let row_no = r + 1;
        if rec.len() != width {
            return Err(malformed(row_no, rec.len().min(width) + 1, format!("expected {width} cells")));
        }
        let date = Month::parse(&rec[0]).ok_or_else(|| malformed(row_no, 1, format!("bad date {:?}", &rec[0])))?;
        if let Some(&prev) = dates.last() {
            if date != Month::next(prev) {
                return Err(malformed(row_no, 1, format!("{date} does not follow {prev}")));
            }
        }
        dates.push(date);
        for (j, col) in columns.iter_mut().enumerate() {
            let cell = &rec[j + 1];
            if is_missing(cell) {
                col.push(None);
            } else {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| malformed(row_no, j + 2, format!("not a number: {cell:?}")))?;
                col.push(if v.is_finite() { Some(v) } else { None });
            }
        }
    }
    if dates.is_empty() {
        return Err(Error::EmptyData);
    }
    let series = names
        .into_iter()
        .zip(tcodes)
        .zip(columns)
        .map(|((name, tcode), values)| Series { name, tcode, values })
        .collect();
    Ok(MacroPanel { dates, series })
}
