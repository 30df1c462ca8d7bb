use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FRED-MD transform codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tcode {
    Level = 1,
    Diff = 2,
    Diff2 = 3,
    Log = 4,
    DiffLog = 5,
    Diff2Log = 6,
    DiffPctChange = 7,
}

impl Tcode {
    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => Tcode::Level,
            2 => Tcode::Diff,
            3 => Tcode::Diff2,
            4 => Tcode::Log,
            5 => Tcode::DiffLog,
            6 => Tcode::Diff2Log,
            7 => Tcode::DiffPctChange,
            _ => return None,
        })
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Number of leading entries left undefined.
    pub fn lost(self) -> usize {
        match self {
            Tcode::Level | Tcode::Log => 0,
            Tcode::Diff | Tcode::DiffLog => 1,
            Tcode::Diff2 | Tcode::Diff2Log | Tcode::DiffPctChange => 2,
        }
    }

    fn uses_log(self) -> bool {
        matches!(self, Tcode::Log | Tcode::DiffLog | Tcode::Diff2Log)
    }
}

fn diff(x: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut out = vec![None; x.len()];
    for t in 1..x.len() {
        if let (Some(a), Some(b)) = (x[t], x[t - 1]) {
            out[t] = Some(a - b);
        }
    }
    out
}

/// Applies `code` entrywise; missing inputs and leading undefined entries
/// come back as `None`.
pub fn apply_tcode(x: &[Option<f64>], code: Tcode) -> Result<Vec<Option<f64>>> {
    let base: Vec<Option<f64>> = if code.uses_log() {
        x.iter()
            .enumerate()
            .map(|(i, v)| match *v {
                Some(v) if v > 0.0 => Ok(Some(v.ln())),
                Some(v) => Err(Error::NonPositiveForLog { index: i, value: v }),
                None => Ok(None),
            })
            .collect::<Result<_>>()?
    } else {
        x.to_vec()
    };
    Ok(match code {
        Tcode::Level | Tcode::Log => base,
        Tcode::Diff | Tcode::DiffLog => diff(&base),
        Tcode::Diff2 | Tcode::Diff2Log => diff(&diff(&base)),
        Tcode::DiffPctChange => {
            let mut growth = vec![None; x.len()];
            for t in 1..x.len() {
                if let (Some(a), Some(b)) = (x[t], x[t - 1]) {
                    growth[t] = Some(a / b - 1.0);
                }
            }
            diff(&growth)
        }
    })
}

/// Rebuilds a fully observed series from its transform and its first
/// `code.lost()` raw values.
pub fn invert_tcode(z: &[f64], code: Tcode, initial: &[f64]) -> Result<Vec<f64>> {
    let k = code.lost();
    if initial.len() != k {
        return Err(Error::LengthMismatch(k, initial.len()));
    }
    if z.len() < k {
        return Err(Error::InsufficientLength { needed: k, got: z.len() });
    }
    let n = z.len();
    let mut out = vec![0.0; n];
    out[..k].copy_from_slice(initial);
    match code {
        Tcode::Level => out.copy_from_slice(z),
        Tcode::Log => {
            for t in 0..n {
                out[t] = z[t].exp();
            }
        }
        Tcode::Diff => {
            for t in 1..n {
                out[t] = out[t - 1] + z[t];
            }
        }
        Tcode::DiffLog => {
            for t in 1..n {
                out[t] = (out[t - 1].ln() + z[t]).exp();
            }
        }
        Tcode::Diff2 => {
            for t in 2..n {
                out[t] = 2.0 * out[t - 1] - out[t - 2] + z[t];
            }
        }
        Tcode::Diff2Log => {
            for t in 2..n {
                out[t] = (2.0 * out[t - 1].ln() - out[t - 2].ln() + z[t]).exp();
            }
        }
        Tcode::DiffPctChange => {
            for t in 2..n {
                let g = out[t - 1] / out[t - 2] - 1.0 + z[t];
                out[t] = out[t - 1] * (1.0 + g);
            }
        }
    }
    Ok(out)
}

/// `100·(CPI_t − CPI_{t−1}) / CPI_{t−1}`, first entry missing.
pub fn compute_inflation(cpi: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    for (i, v) in cpi.iter().enumerate() {
        if let Some(v) = *v {
            if !(v > 0.0) {
                return Err(Error::NonPositiveCpi { index: i, value: v });
            }
        }
    }
    let mut out = vec![None; cpi.len()];
    for t in 1..cpi.len() {
        if let (Some(a), Some(b)) = (cpi[t], cpi[t - 1]) {
            out[t] = Some((a - b) / b * 100.0);
        }
    }
    Ok(out)
}
