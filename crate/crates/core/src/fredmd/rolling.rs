use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::panel::{MacroPanel, Month, Series};
use super::transform::{apply_tcode, compute_inflation, Tcode};
use crate::error::{Error, Result};
use crate::filter::{tski_run, TskiConfig};
use crate::knockoffs::{FittedGaussianSampler, ShrinkageConfig};
use crate::numerics::{column_mean_sd, Matrix, RngStream, MIN_SD};

pub const DEFAULT_CPI_SERIES: &str = "CPIAUCSL";
pub const INFLATION_NAME: &str = "INFLATION";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingOptions {
    pub window_months: usize,
    pub cpi_series: String,
    /// A window is discarded when more than this fraction of its rows drop.
    pub max_drop_fraction: f64,
}

impl Default for RollingOptions {
    fn default() -> Self {
        Self {
            window_months: 60,
            cpi_series: DEFAULT_CPI_SERIES.to_string(),
            max_drop_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    /// First and last design month; the last response is the month after `end`.
    pub start: Month,
    pub end: Month,
    pub row_months: Vec<Month>,
    pub y: Vec<f64>,
    pub x: Matrix<f64>,
    pub dropped_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardedWindow {
    pub start: Month,
    pub end: Month,
    pub dropped_rows: usize,
}

/// Rolling one-month-ahead inflation design. Column `j < m` is series `j` at
/// month `t`, column `m + j` the same series at `t − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingDesign {
    pub columns: Vec<String>,
    pub windows: Vec<Window>,
    pub discarded: Vec<DiscardedWindow>,
    pub options: RollingOptions,
}

/// Transformed covariates with the CPI column replaced by inflation, plus the
/// inflation series itself.
fn transformed_panel(panel: &MacroPanel, cpi_series: &str) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>, Vec<Option<f64>>)> {
    let cpi = panel
        .find(cpi_series)
        .ok_or_else(|| Error::MissingSeries(cpi_series.to_string()))?;
    let inflation = compute_inflation(&panel.series[cpi].values)?;
    let mut names = Vec::with_capacity(panel.series.len());
    let mut cols = Vec::with_capacity(panel.series.len());
    for (j, s) in panel.series.iter().enumerate() {
        if j == cpi {
            names.push(INFLATION_NAME.to_string());
            cols.push(inflation.clone());
        } else {
            names.push(s.name.clone());
            cols.push(apply_tcode(&s.values, s.tcode)?);
        }
    }
    Ok((names, cols, inflation))
}

pub fn build_rolling(panel: &MacroPanel, options: &RollingOptions) -> Result<RollingDesign> {
    let w = options.window_months;
    if w == 0 {
        return Err(Error::InvalidParameter("window must be at least one month".into()));
    }
    let months = panel.dates.len();
    if months < w + 1 {
        return Err(Error::InsufficientHistory { months, needed: w + 1 });
    }
    let (names, cols, inflation) = transformed_panel(panel, &options.cpi_series)?;
    let m = names.len();
    let columns: Vec<String> = names
        .iter()
        .cloned()
        .chain(names.iter().map(|n| format!("{n}_lag1")))
        .collect();

    let row = |t: usize| -> Option<(f64, Vec<f64>)> {
        if t == 0 {
            return None;
        }
        let y = inflation[t + 1]?;
        let mut x = Vec::with_capacity(2 * m);
        for lag in 0..2 {
            for c in &cols {
                x.push(c[t - lag]?);
            }
        }
        Some((y, x))
    };

    let mut windows = Vec::new();
    let mut discarded = Vec::new();
    for s in 0..months - w {
        let (start, end) = (panel.dates[s], panel.dates[s + w - 1]);
        let mut y = Vec::with_capacity(w);
        let mut rows = Vec::with_capacity(w);
        let mut row_months = Vec::with_capacity(w);
        for t in s..s + w {
            if let Some((yt, xt)) = row(t) {
                y.push(yt);
                rows.push(xt);
                row_months.push(panel.dates[t]);
            }
        }
        let dropped_rows = w - y.len();
        if dropped_rows as f64 > options.max_drop_fraction * w as f64 || y.is_empty() {
            warn!("discarding window {start}..{end}: {dropped_rows} of {w} rows incomplete");
            discarded.push(DiscardedWindow {
                start,
                end,
                dropped_rows,
            });
            continue;
        }
        windows.push(Window {
            start,
            end,
            row_months,
            y,
            x: Matrix::from_rows(&rows)?,
            dropped_rows,
        });
    }
    if windows.is_empty() {
        return Err(Error::InsufficientHistory { months, needed: w + 1 });
    }
    Ok(RollingDesign {
        columns,
        windows,
        discarded,
        options: options.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingParams {
    pub tski: TskiConfig<f64>,
    pub shrinkage: ShrinkageConfig,
    pub repeats: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFrequency {
    pub start: Month,
    pub end: Month,
    pub n_rows: usize,
    pub dropped_rows: usize,
    /// Share of repetitions with a non-empty selection; `None` when the
    /// window failed.
    pub any_selection: Option<f64>,
    /// Per-column selection counts over the repetitions.
    pub counts: Vec<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub repeats: usize,
    pub columns: Vec<String>,
    pub windows: Vec<WindowFrequency>,
    /// Selection count over all successful window repetitions, divided by
    /// their number.
    pub per_covariate: Vec<f64>,
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl FrequencyReport {
    pub fn windows_csv(&self) -> String {
        let mut out = String::from("window_start,window_end,n_rows,dropped_rows,any_selection\n");
        for w in &self.windows {
            let any = w.any_selection.map(fmt_float).unwrap_or_default();
            writeln!(out, "{},{},{},{},{}", w.start, w.end, w.n_rows, w.dropped_rows, any).expect("string write");
        }
        out
    }

    pub fn covariates_csv(&self) -> String {
        let mut out = String::from("covariate,frequency\n");
        for (name, f) in self.columns.iter().zip(&self.per_covariate) {
            writeln!(out, "{},{}", name, fmt_float(*f)).expect("string write");
        }
        out
    }
}

/// Standardizes within the window and drops columns that are constant there;
/// returns the kept column indices.
fn window_design(x: &Matrix<f64>) -> (Matrix<f64>, Vec<usize>) {
    let mut kept = Vec::new();
    let mut cols = Vec::new();
    for (j, c) in x.columns().into_iter().enumerate() {
        let (m, s) = column_mean_sd(&c);
        if s > MIN_SD {
            kept.push(j);
            cols.push(c.into_iter().map(|v| (v - m) / s).collect::<Vec<f64>>());
        }
    }
    let z = if cols.is_empty() {
        Matrix::zeros(x.rows(), 0)
    } else {
        Matrix::from_columns(&cols).expect("equal column lengths")
    };
    (z, kept)
}

/// Runs the filter `repeats` times per window. Window `w`, repetition `r`
/// uses stream `(seed, w).derive(r)`.
pub fn rolling_inference(design: &RollingDesign, params: &RollingParams) -> Result<FrequencyReport> {
    if params.repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    params.tski.validate()?;
    let p = design.columns.len();
    let sampler = FittedGaussianSampler {
        shrinkage: params.shrinkage,
    };
    let jobs: Vec<(usize, usize)> = (0..design.windows.len())
        .flat_map(|w| (0..params.repeats).map(move |r| (w, r)))
        .collect();
    let prepared: Vec<(Matrix<f64>, Vec<usize>)> = design.windows.iter().map(|w| window_design(&w.x)).collect();
    let runs: Vec<Result<Vec<usize>>> = jobs
        .par_iter()
        .map(|&(w, r)| {
            let (z, kept) = &prepared[w];
            if kept.is_empty() {
                return Err(Error::EmptyData);
            }
            let rng = RngStream::new(params.seed, w as u64).derive(r as u64);
            let res = tski_run(&design.windows[w].y, z, &sampler, &params.tski, &rng)?;
            Ok(res.selected.iter().map(|&j| kept[j]).collect())
        })
        .collect();

    let mut windows = Vec::with_capacity(design.windows.len());
    let mut totals = vec![0usize; p];
    let mut successes = 0usize;
    for (w, win) in design.windows.iter().enumerate() {
        let slice = &runs[w * params.repeats..(w + 1) * params.repeats];
        let mut counts = vec![0usize; p];
        let mut any = 0usize;
        let mut error = None;
        for res in slice {
            match res {
                Ok(sel) => {
                    any += usize::from(!sel.is_empty());
                    for &j in sel {
                        counts[j] += 1;
                    }
                }
                Err(e) => {
                    error = Some(e.to_string());
                    break;
                }
            }
        }
        if let Some(e) = &error {
            warn!("window {}..{} failed: {e}", win.start, win.end);
            counts = vec![0; p];
        } else {
            successes += 1;
            for (t, c) in totals.iter_mut().zip(&counts) {
                *t += c;
            }
        }
        windows.push(WindowFrequency {
            start: win.start,
            end: win.end,
            n_rows: win.y.len(),
            dropped_rows: win.dropped_rows,
            any_selection: error.is_none().then(|| any as f64 / params.repeats as f64),
            counts,
            error,
        });
    }
    let denom = (successes * params.repeats) as f64;
    let per_covariate = totals
        .into_iter()
        .map(|c| if successes == 0 { 0.0 } else { c as f64 / denom })
        .collect();
    Ok(FrequencyReport {
        repeats: params.repeats,
        columns: design.columns.clone(),
        windows,
        per_covariate,
    })
}

/// Run metadata for the rolling pipeline.
pub fn rolling_metadata(design: &RollingDesign, params: &RollingParams) -> serde_json::Value {
    serde_json::json!({
        "seed": params.seed,
        "repeats": params.repeats,
        "q": params.tski.q,
        "statistic": params.tski.statistic.name(),
        "tau_star": params.tski.tau_star,
        "tau1": params.tski.resolved_tau1(),
        "shrinkage": params.shrinkage,
        "window_months": design.options.window_months,
        "cpi_series": design.options.cpi_series,
        "max_drop_fraction": design.options.max_drop_fraction,
        "n_columns": design.columns.len(),
        "n_windows": design.windows.len(),
        "dropped_rows": design.windows.iter().map(|w| serde_json::json!({
            "start": w.start.to_string(),
            "end": w.end.to_string(),
            "dropped_rows": w.dropped_rows,
        })).collect::<Vec<_>>(),
        "discarded_windows": design.discarded.iter().map(|d| serde_json::json!({
            "start": d.start.to_string(),
            "end": d.end.to_string(),
            "dropped_rows": d.dropped_rows,
        })).collect::<Vec<_>>(),
    })
}

/// Random panel in the FRED-MD layout: `n_series` positive series with
/// cycling transform codes, the first one named as the CPI series.
pub fn synthetic_panel(months: usize, n_series: usize, start: Month, seed: u64) -> MacroPanel {
    let mut rng = RngStream::new(seed, 0);
    let dates: Vec<Month> = (0..months as i64).map(|k| Month::from_ordinal(start.ordinal() + k)).collect();
    let series = (0..n_series)
        .map(|j| {
            let (name, tcode) = if j == 0 {
                (DEFAULT_CPI_SERIES.to_string(), Tcode::Diff2Log)
            } else {
                (format!("S{j:03}"), Tcode::from_code((j % 7) as u8 + 1).expect("code in range"))
            };
            let mut level = 100.0 + 50.0 * rng.uniform();
            let values = (0..months)
                .map(|_| {
                    level *= (0.002 + 0.01 * rng.normal()).exp();
                    Some(level)
                })
                .collect();
            Series { name, tcode, values }
        })
        .collect();
    MacroPanel { dates, series }
}

impl MacroPanel {
    /// Writes the panel back out in the FRED-MD layout.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sasdate");
        for s in &self.series {
            write!(out, ",{}", s.name).expect("string write");
        }
        out.push_str("\nTransform:");
        for s in &self.series {
            write!(out, ",{}", s.tcode.code()).expect("string write");
        }
        out.push('\n');
        for (t, d) in self.dates.iter().enumerate() {
            write!(out, "{}/1/{}", d.month, d.year).expect("string write");
            for s in &self.series {
                match s.values[t] {
                    Some(v) => write!(out, ",{v:?}").expect("string write"),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}
