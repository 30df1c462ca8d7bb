//! Robustness diagnostics: Gaussian conditional KL statistics, the FDR bound
//! evaluator and the geometric mixing term.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::subsample_indices;
use crate::knockoffs::{fit_knockoff_model, sample_knockoffs, GaussianKnockoffModel, ShrinkageConfig};
use crate::numerics::{cholesky, solve_spd, Matrix, RngStream};
use crate::scalar::Real;

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn default_epsilon_grid() -> Vec<f64> {
    log_grid(1e-4, 5.0, 30)
}

/// KL statistics over Monte Carlo draws: `per_subsample[k][r][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlSamples {
    pub per_subsample: Vec<Vec<Vec<f64>>>,
    pub epsilon_grid: Vec<f64>,
}

impl KlSamples {
    pub fn new(per_subsample: Vec<Vec<Vec<f64>>>) -> Self {
        Self {
            per_subsample,
            epsilon_grid: default_epsilon_grid(),
        }
    }

    /// `max_j KL̂_j` for every subsample and draw.
    pub fn maxima(&self) -> Vec<Vec<f64>> {
        self.per_subsample
            .iter()
            .map(|draws| {
                draws
                    .iter()
                    .map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingBoundParams {
    pub c0: f64,
    pub rho: f64,
    pub q: usize,
    pub n: usize,
}

/// `c0·ρ^q·n`. `ρ = 0` gives zero for every `q`, including `q = 0`.
pub fn mixing_bound(params: &MixingBoundParams) -> Result<f64> {
    if !(params.c0 > 0.0) || !params.c0.is_finite() {
        return Err(Error::InvalidParameter(format!("c0 must be positive, got {}", params.c0)));
    }
    if !(0.0..1.0).contains(&params.rho) {
        return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {}", params.rho)));
    }
    if params.rho == 0.0 {
        return Ok(0.0);
    }
    let q = i32::try_from(params.q).map_err(|_| Error::InvalidParameter("q too large".into()))?;
    Ok(params.c0 * params.rho.powi(q) * params.n as f64)
}

/// The three addends of the bound at the minimising `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdrBound {
    pub epsilon: f64,
    pub tau_term: f64,
    pub probability_term: f64,
    pub mixing_term: f64,
    pub total: f64,
}

/// `min_ε [τ*·e^ε + Σ_k freq(max_j KL̂_j^k > ε)] + mixing`, with the
/// decomposition at the minimiser (smallest `ε` on ties).
pub fn fdr_bound_detail(kl: &KlSamples, tau_star: f64, mixing: f64) -> Result<FdrBound> {
    let grid = &kl.epsilon_grid;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid[0] <= 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("epsilon grid must be positive and strictly increasing".into()));
    }
    if kl.per_subsample.is_empty() || kl.per_subsample.iter().any(|d| d.is_empty()) {
        return Err(Error::EmptyData);
    }
    let maxima = kl.maxima();
    let mut best: Option<FdrBound> = None;
    for &eps in grid {
        let prob: f64 = maxima
            .iter()
            .map(|m| m.iter().filter(|&&v| v > eps).count() as f64 / m.len() as f64)
            .sum();
        let tau_term = tau_star * eps.exp();
        let total = tau_term + prob + mixing;
        if best.is_none_or(|b| total < b.total) {
            best = Some(FdrBound {
                epsilon: eps,
                tau_term,
                probability_term: prob,
                mixing_term: mixing,
                total,
            });
        }
    }
    Ok(best.expect("non-empty grid"))
}

pub fn fdr_bound(kl: &KlSamples, tau_star: f64, mixing: f64) -> Result<f64> {
    fdr_bound_detail(kl, tau_star, mixing).map(|b| b.total)
}

fn gaussian_rows<T: Real>(l: &Matrix<T>, mu: &[T], n: usize, rng: &mut RngStream) -> Matrix<T> {
    let p = mu.len();
    let z = Matrix::from_fn(n, p, |_, _| T::c(rng.normal()));
    Matrix::from_fn(n, p, |i, j| {
        let mut acc = mu[j];
        for k in 0..=j {
            acc = acc + l[(j, k)] * z[(i, k)];
        }
        acc
    })
}

/// `n` i.i.d. rows from `N(mu, sigma)`.
pub fn sample_gaussian_rows<T: Real>(sigma: &Matrix<T>, mu: &[T], n: usize, rng: &mut RngStream) -> Result<Matrix<T>> {
    if sigma.rows() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: sigma.rows(),
            got: mu.len(),
        });
    }
    Ok(gaussian_rows(&cholesky(sigma)?, mu, n, rng))
}

fn precision<T: Real>(sigma: &Matrix<T>) -> Result<Matrix<T>> {
    cholesky(sigma)?;
    let raw = solve_spd(sigma, &Matrix::identity(sigma.rows()))?;
    Ok(Matrix::from_fn(sigma.rows(), sigma.cols(), |i, j| (raw[(i, j)] + raw[(j, i)]) / T::c(2.0)))
}

/// Per-coordinate sums over the rows of
/// `log f(x_j) + log g(x̃_j) − log f(x̃_j) − log g(x_j)`, where `f` is the
/// true Gaussian conditional of `X_j | x_{−j}` and `g` the one implied by
/// the model's `Σ̂`, both conditioned on the original row.
pub fn gaussian_kl_stats<T: Real>(
    true_sigma: &Matrix<T>,
    true_mu: &[T],
    model: &GaussianKnockoffModel<T>,
    x: &Matrix<T>,
    x_tilde: &Matrix<T>,
) -> Result<Vec<T>> {
    let p = model.dim();
    if true_sigma.shape() != (p, p) || true_mu.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: true_sigma.rows(),
        });
    }
    if x.cols() != p || x.shape() != x_tilde.shape() {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.cols(),
        });
    }
    let omega = precision(true_sigma)?;
    let omega_hat = &model.omega_hat;
    let half = T::c(0.5);
    let mut out = vec![T::zero(); p];
    let mut cf = vec![T::zero(); p];
    let mut cg = vec![T::zero(); p];
    for i in 0..x.rows() {
        let row = x.row(i);
        for j in 0..p {
            cf[j] = row[j] - true_mu[j];
            cg[j] = row[j] - model.mu[j];
        }
        let af = omega.matvec(&cf)?;
        let ag = omega_hat.matvec(&cg)?;
        for j in 0..p {
            let delta = x_tilde[(i, j)] - row[j];
            let (wf, wg) = (omega[(j, j)], omega_hat[(j, j)]);
            let rf = af[j] / wf;
            let rg = ag[j] / wg;
            out[j] = out[j] + half * delta * ((T::c(2.0) * rf + delta) * wf - (T::c(2.0) * rg + delta) * wg);
        }
    }
    Ok(out)
}

/// KL statistics from `draws` fresh samples of `n` i.i.d. rows from
/// `N(true_mu, true_sigma)`, split into the `q + 1` stride subsamples.
/// Draw `r` uses `rng.derive(r)`.
pub fn simulate_kl_samples<T: Real>(
    true_sigma: &Matrix<T>,
    true_mu: &[T],
    model: &GaussianKnockoffModel<T>,
    n: usize,
    q: usize,
    draws: usize,
    rng: &RngStream,
) -> Result<KlSamples> {
    if draws == 0 {
        return Err(Error::InvalidParameter("draws must be at least 1".into()));
    }
    if true_mu.len() != true_sigma.rows() {
        return Err(Error::DimensionMismatch {
            expected: true_sigma.rows(),
            got: true_mu.len(),
        });
    }
    let blocks = subsample_indices(n, q)?;
    let l = cholesky(true_sigma)?;
    let per_draw: Vec<Vec<Vec<f64>>> = (0..draws)
        .into_par_iter()
        .map(|r| {
            let mut g = rng.derive(r as u64);
            let x = gaussian_rows(&l, true_mu, n, &mut g);
            let xt = sample_knockoffs(model, &x, &mut g)?;
            blocks
                .iter()
                .map(|h| {
                    let kl = gaussian_kl_stats(true_sigma, true_mu, model, &x.select_rows(h), &xt.select_rows(h))?;
                    Ok(kl.into_iter().map(|v| v.to_f64_lossy()).collect())
                })
                .collect::<Result<Vec<Vec<f64>>>>()
        })
        .collect::<Result<_>>()?;
    Ok(KlSamples::new(transpose_draws(per_draw, blocks.len())))
}

/// Plug-in analogue on observed data: the sample moments of `x`, conditioned
/// with the default eigenvalue floor so that `n ≤ p` still yields a proper
/// law, stand in for the truth. Each draw resamples the knockoffs (draw `r`
/// uses `rng.derive(r)`).
pub fn surrogate_kl_samples<T: Real>(
    x: &Matrix<T>,
    model: &GaussianKnockoffModel<T>,
    q: usize,
    draws: usize,
    rng: &RngStream,
) -> Result<KlSamples> {
    if draws == 0 {
        return Err(Error::InvalidParameter("draws must be at least 1".into()));
    }
    let blocks = subsample_indices(x.rows(), q)?;
    let reference = fit_knockoff_model(x, &ShrinkageConfig::default())?;
    let (mu, sigma) = (reference.mu, reference.sigma_hat);
    let per_draw: Vec<Vec<Vec<f64>>> = (0..draws)
        .into_par_iter()
        .map(|r| {
            let xt = sample_knockoffs(model, x, &mut rng.derive(r as u64))?;
            blocks
                .iter()
                .map(|h| {
                    let kl = gaussian_kl_stats(&sigma, &mu, model, &x.select_rows(h), &xt.select_rows(h))?;
                    Ok(kl.into_iter().map(|v| v.to_f64_lossy()).collect())
                })
                .collect::<Result<Vec<Vec<f64>>>>()
        })
        .collect::<Result<_>>()?;
    Ok(KlSamples::new(transpose_draws(per_draw, blocks.len())))
}

fn transpose_draws(per_draw: Vec<Vec<Vec<f64>>>, k: usize) -> Vec<Vec<Vec<f64>>> {
    (0..k).map(|b| per_draw.iter().map(|d| d[b].clone()).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlSummary {
    pub subsample: usize,
    pub mean_max: f64,
    pub max_max: f64,
}

/// JSON-ready bound report. `label` is `"simulation"` when the KL statistics
/// come from the true law, `"surrogate"` for the plug-in analogue on data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub label: String,
    pub tau_star: f64,
    pub mixing: MixingBoundParams,
    pub draws: usize,
    pub per_subsample: Vec<KlSummary>,
    pub bound: FdrBound,
}

impl DiagnosticReport {
    pub fn build(label: &str, kl: &KlSamples, tau_star: f64, mixing: MixingBoundParams) -> Result<Self> {
        let bound = fdr_bound_detail(kl, tau_star, mixing_bound(&mixing)?)?;
        let per_subsample = kl
            .maxima()
            .into_iter()
            .enumerate()
            .map(|(k, m)| KlSummary {
                subsample: k,
                mean_max: m.iter().sum::<f64>() / m.len() as f64,
                max_max: m.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
            .collect();
        Ok(Self {
            label: label.to_string(),
            tau_star,
            mixing,
            draws: kl.per_subsample.first().map_or(0, Vec::len),
            per_subsample,
            bound,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
