//! Dense linear algebra, seeded random streams, and column standardization.

mod linalg;
mod matrix;
mod rng;
mod standardize;

pub use linalg::{cholesky, cholesky_solve_in_place, min_eigenvalue, solve_spd, PIVOT_TOL, SYMMETRY_TOL};
pub(crate) use linalg::cholesky_unchecked;
pub use matrix::Matrix;
pub use rng::{splitmix64, RngStream};
pub use standardize::{center, column_mean_sd, standardize_columns, StandardizationInfo, MIN_SD};
