//! Cholesky-based dense linear algebra for symmetric positive-definite systems.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;

/// Relative symmetry tolerance accepted by the routines below.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Pivots at or below this multiple of the largest diagonal entry are treated as zero.
pub const PIVOT_TOL: f64 = 1e-12;

/// Lower-triangular `L` with `A = L·Lᵀ`.
pub fn cholesky<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    a.check_symmetric(T::c(SYMMETRY_TOL))?;
    cholesky_unchecked(a)
}

/// Cholesky without the symmetry pre-check; only the lower triangle of `a` is read.
pub(crate) fn cholesky_unchecked<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    let max_diag = a.diag().into_iter().fold(T::zero(), T::max);
    let tol = T::c(PIVOT_TOL) * max_diag;
    if n > 0 && max_diag <= T::zero() {
        return Err(Error::NotPositiveDefinite {
            index: 0,
            pivot: max_diag.to_f64_lossy(),
        });
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot: d.to_f64_lossy(),
            });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            {
                let (li, lj) = (l.row(i), l.row(j));
                for k in 0..j {
                    s = s - li[k] * lj[k];
                }
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L·Lᵀ·x = b` in place given the Cholesky factor.
pub fn cholesky_solve_in_place<T: Real>(l: &Matrix<T>, b: &mut [T]) {
    let n = l.rows();
    for i in 0..n {
        let row = l.row(i);
        let mut s = b[i];
        for k in 0..i {
            s = s - row[k] * b[k];
        }
        b[i] = s / row[i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s = s - l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// `X` with `A·X = B` for symmetric positive-definite `A`.
pub fn solve_spd<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: b.rows(),
        });
    }
    let l = cholesky(a)?;
    let mut cols = b.columns();
    for c in cols.iter_mut() {
        cholesky_solve_in_place(&l, c);
    }
    Matrix::from_columns(&cols).map(|m| {
        if b.cols() == 0 {
            Matrix::zeros(a.rows(), 0)
        } else {
            m
        }
    })
}

/// Smallest eigenvalue of a symmetric matrix.
///
/// Bisection on whether `A − λI` admits a Cholesky factorisation. The returned
/// value is the lower end of the final bracket, so `A − λI` is positive definite
/// at the returned `λ` (up to round-off).
pub fn min_eigenvalue<T: Real>(a: &Matrix<T>) -> Result<T> {
    a.check_symmetric(T::c(SYMMETRY_TOL))?;
    let n = a.rows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let radius = a.max_abs() * T::from_usize_lossy(n);
    if radius == T::zero() {
        return Ok(T::zero());
    }
    let shifted = |lambda: T| {
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] = m[(i, i)] - lambda;
        }
        m
    };
    let mut lo = -radius * T::c(1.01);
    let mut hi = radius;
    let abs_floor = radius * T::c(1e-14);
    for _ in 0..400 {
        let mid = (lo + hi) / T::c(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if cholesky_unchecked(&shifted(mid)).is_ok() {
            lo = mid;
        } else {
            hi = mid;
        }
        let width = hi - lo;
        if width <= T::c(1e-9) * lo.abs().max(hi.abs()) || width <= abs_floor {
            break;
        }
    }
    Ok(lo)
}
