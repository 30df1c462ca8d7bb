use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{fit_forest_paired, mda_statistics, ForestConfig};
use crate::lasso::{LassoConfig, LassoProblem};
use crate::numerics::{center, column_mean_sd, Matrix, RngStream};
use crate::scalar::Real;

/// Which knockoff statistic a run computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Statistic<T> {
    Lcd(LassoConfig<T>),
    Mda(ForestConfig),
}

impl<T: Real> Statistic<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Lcd(_) => "lcd",
            Statistic::Mda(_) => "mda",
        }
    }

    pub fn compute(&self, v: &[T], u: &Matrix<T>, u_tilde: &Matrix<T>, rng: &mut RngStream) -> Result<StatOutput<T>> {
        match self {
            Statistic::Lcd(cfg) => lcd_fit(v, u, u_tilde, cfg, rng),
            Statistic::Mda(cfg) => Ok(StatOutput {
                w: mda_knockoff_statistics(v, u, u_tilde, cfg, rng)?,
                kkt_residual: None,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatOutput<T> {
    pub w: Vec<T>,
    /// KKT residual of the underlying Lasso fit, when there is one.
    pub kkt_residual: Option<T>,
}

fn check_shapes<T: Real>(v: &[T], u: &Matrix<T>, u_tilde: &Matrix<T>) -> Result<()> {
    if u.shape() != u_tilde.shape() {
        return Err(Error::DimensionMismatch {
            expected: u.cols(),
            got: u_tilde.cols(),
        });
    }
    if v.len() != u.rows() {
        return Err(Error::DimensionMismatch {
            expected: u.rows(),
            got: v.len(),
        });
    }
    if v.is_empty() || u.cols() == 0 {
        return Err(Error::EmptyData);
    }
    Ok(())
}

/// Standardizes `[U, Ũ]` column by column; constant columns become zero.
fn standardized_design<T: Real>(u: &Matrix<T>, u_tilde: &Matrix<T>) -> Result<Matrix<T>> {
    let z = u.hstack(u_tilde)?;
    let cols: Vec<Vec<T>> = z
        .columns()
        .into_iter()
        .map(|c| {
            let (m, s) = column_mean_sd(&c);
            if s > T::c(crate::numerics::MIN_SD) {
                c.into_iter().map(|x| (x - m) / s).collect()
            } else {
                vec![T::zero(); c.len()]
            }
        })
        .collect();
    Matrix::from_columns(&cols)
}

/// Lasso coefficient difference `W_j = |β̂_j| − |β̂_{j+p}|` on the jointly
/// standardized design `[U, Ũ]` with a centered response.
pub fn lcd_statistics<T: Real>(
    v: &[T],
    u: &Matrix<T>,
    u_tilde: &Matrix<T>,
    cfg: &LassoConfig<T>,
    rng: &mut RngStream,
) -> Result<Vec<T>> {
    lcd_fit(v, u, u_tilde, cfg, rng).map(|o| o.w)
}

fn lcd_fit<T: Real>(
    v: &[T],
    u: &Matrix<T>,
    u_tilde: &Matrix<T>,
    cfg: &LassoConfig<T>,
    rng: &mut RngStream,
) -> Result<StatOutput<T>> {
    check_shapes(v, u, u_tilde)?;
    let p = u.cols();
    let z = standardized_design(u, u_tilde)?;
    let (vc, _) = center(v);
    let fit = LassoProblem::new(&z, &vc)?.paired()?.fit(cfg, rng)?;
    Ok(StatOutput {
        w: (0..p).map(|j| fit.beta[j].abs() - fit.beta[j + p].abs()).collect(),
        kkt_residual: Some(fit.kkt_residual),
    })
}

/// Forest MDA statistic: one forest on `[U, Ũ]`, then swap evaluations.
pub fn mda_knockoff_statistics<T: Real>(
    v: &[T],
    u: &Matrix<T>,
    u_tilde: &Matrix<T>,
    cfg: &ForestConfig,
    rng: &mut RngStream,
) -> Result<Vec<T>> {
    check_shapes(v, u, u_tilde)?;
    let forest = fit_forest_paired(&u.hstack(u_tilde)?, v, cfg, rng)?;
    mda_statistics(&forest, u, u_tilde, v)
}
