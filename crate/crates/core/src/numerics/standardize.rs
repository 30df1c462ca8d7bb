use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;

/// Column means and population standard deviations (divisor `n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationInfo<T> {
    pub means: Vec<T>,
    pub sds: Vec<T>,
}

pub const MIN_SD: f64 = 1e-12;

pub fn column_mean_sd<T: Real>(col: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(col.len());
    let mean = col.iter().copied().sum::<T>() / n;
    let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}

/// Centers every column and scales it to unit population standard deviation.
pub fn standardize_columns<T: Real>(x: &Matrix<T>) -> Result<(Matrix<T>, StandardizationInfo<T>)> {
    if x.rows() == 0 {
        return Err(Error::EmptyData);
    }
    let mut means = Vec::with_capacity(x.cols());
    let mut sds = Vec::with_capacity(x.cols());
    for (j, col) in x.columns().iter().enumerate() {
        let (m, s) = column_mean_sd(col);
        if !(s > T::c(MIN_SD)) {
            return Err(Error::ConstantColumn(j));
        }
        means.push(m);
        sds.push(s);
    }
    let out = Matrix::from_fn(x.rows(), x.cols(), |i, j| (x[(i, j)] - means[j]) / sds[j]);
    Ok((out, StandardizationInfo { means, sds }))
}

/// Subtracts the mean from a vector.
pub fn center<T: Real>(v: &[T]) -> (Vec<T>, T) {
    if v.is_empty() {
        return (Vec::new(), T::zero());
    }
    let mean = v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len());
    (v.iter().map(|&x| x - mean).collect(), mean)
}
