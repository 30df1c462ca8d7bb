//! Second-order Gaussian knockoffs.
//!
//! The covariates are treated as `N(μ, Σ̂)`. Given a diagonal `D` with
//! `2D − DΩ̂D ⪰ 0` (where `Ω̂ = Σ̂⁻¹`), a knockoff row is drawn from
//! `N(μ + (I − DΩ̂)(x − μ), 2D − DΩ̂D)`. `Σ̂` is the sample covariance shrunk
//! toward its diagonal, and `D` follows the equicorrelated rule on the
//! correlation scale.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, cholesky_unchecked, min_eigenvalue, solve_spd, Matrix, RngStream};
use crate::scalar::Real;

/// Relative jitter added to the conditional covariance before factorisation.
pub const COND_COV_JITTER: f64 = 1e-10;

/// Shrinkage intensity toward the diagonal of the sample covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    /// Smallest value on the grid `{0, 0.01, …, 1}` that lifts the smallest
    /// correlation eigenvalue above the floor.
    Auto,
    Fixed(f64),
    }

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageConfig {
    pub gamma: Gamma,
    pub eigen_floor: f64,
}

/// Eigen floor of [`ShrinkageConfig::conditioned`].
pub const CONDITIONED_EIGEN_FLOOR: f64 = 0.1;

impl ShrinkageConfig {
    /// Automatic `γ` with a floor that keeps the equicorrelated `s` at least
    /// `0.2`. Used by the simulation harness, the rolling macro design and
    /// the command line.
    pub fn conditioned() -> Self {
        Self {
            gamma: Gamma::Auto,
            eigen_floor: CONDITIONED_EIGEN_FLOOR,
        }
    }
}

impl Default for ShrinkageConfig {
    fn default() -> Self {
        Self {
            gamma: Gamma::Auto,
            eigen_floor: 1e-3,
        }
    }
}

/// Fitted Gaussian knockoff generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianKnockoffModel<T> {
    pub mu: Vec<T>,
    pub sigma_hat: Matrix<T>,
    pub omega_hat: Matrix<T>,
    pub d: Vec<T>,
    /// `I − D·Ω̂`
    pub cond_mean_mat: Matrix<T>,
    /// Lower Cholesky factor of `2D − D·Ω̂·D` (plus jitter).
    pub cond_cov_chol: Matrix<T>,
    pub gamma: T,
    /// Equicorrelated `s` on the correlation scale.
    pub s: T,
}

/// Anything that turns a covariate matrix into a knockoff matrix.
///
/// Implementations must not look at the response.
pub trait KnockoffSampler<T: Real>: Sync {
    fn sample(&self, x: &Matrix<T>, rng: &mut RngStream) -> Result<Matrix<T>>;
}

/// Sample mean and covariance (divisor `n − 1`).
/// Column means and the sample covariance (divisor `n − 1`).
pub fn mean_and_covariance<T: Real>(x: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let (n, p) = x.shape();
    let nf = T::from_usize_lossy(n);
    let mut mu = vec![T::zero(); p];
    for i in 0..n {
        for (m, &v) in mu.iter_mut().zip(x.row(i)) {
            *m = *m + v;
        }
    }
    for m in mu.iter_mut() {
        *m = *m / nf;
    }
    let mut s = Matrix::zeros(p, p);
    let mut c = vec![T::zero(); p];
    for i in 0..n {
        for ((cj, &v), &m) in c.iter_mut().zip(x.row(i)).zip(&mu) {
            *cj = v - m;
        }
        for a in 0..p {
            let ca = c[a];
            let row = s.row_mut(a);
            for b in a..p {
                row[b] = row[b] + ca * c[b];
            }
        }
    }
    let denom = T::from_usize_lossy(n - 1);
    for a in 0..p {
        for b in a..p {
            let v = s[(a, b)] / denom;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    (mu, s)
}

fn correlation<T: Real>(s: &Matrix<T>) -> Matrix<T> {
    let sd: Vec<T> = s.diag().into_iter().map(T::sqrt).collect();
    Matrix::from_fn(s.rows(), s.cols(), |i, j| {
        if i == j {
            T::one()
        } else {
            s[(i, j)] / (sd[i] * sd[j])
        }
    })
}

fn auto_gamma(lambda_r: f64, floor: f64) -> Option<f64> {
    (0..=100).map(|k| k as f64 / 100.0).find(|&g| (1.0 - g) * lambda_r + g >= floor)
}

impl<T: Real> GaussianKnockoffModel<T> {
    /// Builds the generator from a covariance `sigma_hat` whose correlation
    /// matrix has smallest eigenvalue at least `lambda_min_corr`.
    fn from_covariance(mu: Vec<T>, sigma_hat: Matrix<T>, lambda_min_corr: T, gamma: T) -> Result<Self> {
        let p = sigma_hat.rows();
        let s = (T::c(2.0) * lambda_min_corr).min(T::one()).max(T::zero());
        let d: Vec<T> = sigma_hat.diag().into_iter().map(|v| s * v).collect();

        let raw_omega = solve_spd(&sigma_hat, &Matrix::identity(p))?;
        let omega_hat = Matrix::from_fn(p, p, |i, j| (raw_omega[(i, j)] + raw_omega[(j, i)]) / T::c(2.0));

        let cond_mean_mat = Matrix::from_fn(p, p, |i, j| {
            let id = if i == j { T::one() } else { T::zero() };
            id - d[i] * omega_hat[(i, j)]
        });

        let cond_cov_chol = if d.iter().all(|&v| v == T::zero()) {
            Matrix::zeros(p, p)
        } else {
            let cov = Matrix::from_fn(p, p, |i, j| {
                let two_d = if i == j { T::c(2.0) * d[i] } else { T::zero() };
                two_d - d[i] * omega_hat[(i, j)] * d[j]
            });
            let base = T::c(COND_COV_JITTER) * sigma_hat.trace() / T::from_usize_lossy(p);
            factor_with_jitter(&cov, base)?
        };

        Ok(Self {
            mu,
            sigma_hat,
            omega_hat,
            d,
            cond_mean_mat,
            cond_cov_chol,
            gamma,
            s,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Same model with `D = 0`: knockoffs equal the originals.
    pub fn with_zero_d(&self) -> Self {
        let p = self.dim();
        Self {
            d: vec![T::zero(); p],
            cond_mean_mat: Matrix::identity(p),
            cond_cov_chol: Matrix::zeros(p, p),
            s: T::zero(),
            ..self.clone()
        }
    }

    /// `2D − DΩ̂D` without jitter.
    pub fn conditional_covariance(&self) -> Matrix<T> {
        let p = self.dim();
        Matrix::from_fn(p, p, |i, j| {
            let two_d = if i == j { T::c(2.0) * self.d[i] } else { T::zero() };
            two_d - self.d[i] * self.omega_hat[(i, j)] * self.d[j]
        })
    }
}

/// Cholesky of `cov + jitter·I`, escalating the jitter by 100× (at most three
/// times) when round-off leaves the matrix numerically indefinite.
fn factor_with_jitter<T: Real>(cov: &Matrix<T>, base: T) -> Result<Matrix<T>> {
    let p = cov.rows();
    let mut jitter = base;
    let mut last_err = None;
    for attempt in 0..4 {
        let mut m = cov.clone();
        for i in 0..p {
            m[(i, i)] = m[(i, i)] + jitter;
        }
        match cholesky_unchecked(&m) {
            Ok(l) => {
                if attempt > 0 {
                    warn!("conditional covariance needed jitter {:e}", jitter.to_f64_lossy());
                }
                return Ok(l);
            }
            Err(e) => last_err = Some(e),
        }
        jitter = jitter * T::c(100.0);
    }
    Err(last_err.expect("at least one attempt"))
}

/// Fits the shrunk second-order model to the rows of `x`.
pub fn fit_knockoff_model<T: Real>(x: &Matrix<T>, cfg: &ShrinkageConfig) -> Result<GaussianKnockoffModel<T>> {
    let (n, p) = x.shape();
    if n < 3 {
        return Err(Error::InsufficientLength { needed: 3, got: n });
    }
    if p == 0 {
        return Err(Error::EmptyData);
    }
    let (mu, s) = mean_and_covariance(x);
    for (j, v) in s.diag().into_iter().enumerate() {
        if !(v.sqrt() > T::c(1e-12)) {
            return Err(Error::ConstantColumn(j));
        }
    }
    let lambda_r = min_eigenvalue(&correlation(&s))?.to_f64_lossy();
    let gamma = match cfg.gamma {
        Gamma::Fixed(g) => {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidParameter(format!("gamma {g} outside [0, 1]")));
            }
            g
        }
        Gamma::Auto => auto_gamma(lambda_r, cfg.eigen_floor).ok_or(Error::ShrinkageFailed {
            floor: cfg.eigen_floor,
        })?,
    };
    let g = T::c(gamma);
    let sigma_hat = Matrix::from_fn(p, p, |i, j| {
        if i == j {
            s[(i, i)]
        } else {
            (T::one() - g) * s[(i, j)]
        }
    });
    // The correlation of (1−γ)S + γ·diag(S) is (1−γ)R + γI.
    let lambda_shrunk = T::c((1.0 - gamma) * lambda_r + gamma);
    GaussianKnockoffModel::from_covariance(mu, sigma_hat, lambda_shrunk, g)
}

/// Knockoff model built from a known covariance (no shrinkage).
pub fn exact_model_from_truth<T: Real>(sigma: &Matrix<T>, mu: &[T]) -> Result<GaussianKnockoffModel<T>> {
    if sigma.rows() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: sigma.rows(),
            got: mu.len(),
        });
    }
    cholesky(sigma)?;
    let lambda = min_eigenvalue(&correlation(sigma))?;
    GaussianKnockoffModel::from_covariance(mu.to_vec(), sigma.clone(), lambda, T::zero())
}

/// Draws one knockoff row per row of `x`, independently.
pub fn sample_knockoffs<T: Real>(
    model: &GaussianKnockoffModel<T>,
    x: &Matrix<T>,
    rng: &mut RngStream,
) -> Result<Matrix<T>> {
    let p = model.dim();
    if x.cols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.cols(),
        });
    }
    let zero_noise = model.d.iter().all(|&v| v == T::zero());
    let mut out = Matrix::zeros(x.rows(), p);
    let mut centered = vec![T::zero(); p];
    let mut z = vec![T::zero(); p];
    for i in 0..x.rows() {
        let xi = x.row(i);
        if zero_noise {
            out.row_mut(i).copy_from_slice(xi);
            continue;
        }
        for ((c, &v), &m) in centered.iter_mut().zip(xi).zip(&model.mu) {
            *c = v - m;
        }
        for zj in z.iter_mut() {
            *zj = T::c(rng.normal());
        }
        let row = out.row_mut(i);
        for a in 0..p {
            let mean: T = model
                .cond_mean_mat
                .row(a)
                .iter()
                .zip(&centered)
                .map(|(&m, &c)| m * c)
                .sum();
            let noise: T = model.cond_cov_chol.row(a)[..=a]
                .iter()
                .zip(&z[..=a])
                .map(|(&l, &zz)| l * zz)
                .sum();
            row[a] = model.mu[a] + mean + noise;
        }
    }
    Ok(out)
}

impl<T: Real> KnockoffSampler<T> for GaussianKnockoffModel<T> {
    fn sample(&self, x: &Matrix<T>, rng: &mut RngStream) -> Result<Matrix<T>> {
        sample_knockoffs(self, x, rng)
    }
}

/// Fits a fresh shrunk model to whatever matrix it is handed, then samples.
#[derive(Debug, Clone, Copy, Default)]
pub struct FittedGaussianSampler {
    pub shrinkage: ShrinkageConfig,
}

impl<T: Real> KnockoffSampler<T> for FittedGaussianSampler {
    fn sample(&self, x: &Matrix<T>, rng: &mut RngStream) -> Result<Matrix<T>> {
        let model = fit_knockoff_model(x, &self.shrinkage)?;
        sample_knockoffs(&model, x, rng)
    }
}
