//! Coordinate-descent Lasso.
//!
//! Minimises `n⁻¹‖y − Xβ‖² + λ‖β‖₁` with no intercept. Because the loss is not
//! halved, each coordinate update soft-thresholds at `λ/2`.
//!
//! When the design is an augmented `[U, Ũ]` the problem can be put in *paired*
//! mode: coordinates `j` and `j + p` are visited together and, within a pair,
//! the one with the larger partial-residual correlation moves first. Every
//! floating-point operation is then a function of the column contents only,
//! so exchanging a column with its partner exchanges the two fitted
//! coefficients bit-for-bit.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaRule<T> {
    Fixed(T),
    /// K-fold cross-validation minimum over a log-spaced path.
    CrossValidated {
        folds: usize,
        path_length: usize,
        path_min_ratio: T,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig<T> {
    pub lambda: LambdaRule<T>,
    /// Cap on full sweeps per fit; each active-set phase between full sweeps
    /// has the same cap.
    pub max_iters: usize,
    /// Sweep-change tolerance; a fit is converged once a full sweep moves no
    /// coefficient by more than `tol` and the KKT residual is below `5·tol`.
    /// Defaults to `1e-7`, or `100·ε` when that is larger (single precision).
    pub tol: T,
    /// Looser tolerance for path and cross-validation fits: they stop once a
    /// full sweep moves no coefficient by more than `√(path_tol·‖y‖²/n)`.
    pub path_tol: T,
}

impl<T: Real> Default for LassoConfig<T> {
    fn default() -> Self {
        Self {
            lambda: LambdaRule::CrossValidated {
                folds: 5,
                path_length: 50,
                path_min_ratio: T::c(1e-3),
            },
            max_iters: 10_000,
            tol: T::c(1e-7).max(T::epsilon() * T::c(100.0)),
            path_tol: T::c(1e-7),
        }
    }
}

impl<T: Real> LassoConfig<T> {
    pub fn fixed(lambda: T) -> Self {
        Self {
            lambda: LambdaRule::Fixed(lambda),
            ..Self::default()
        }
    }

    fn path_params(&self) -> (usize, T) {
        match self.lambda {
            LambdaRule::CrossValidated {
                path_length,
                path_min_ratio,
                ..
            } => (path_length, path_min_ratio),
            LambdaRule::Fixed(_) => (50, T::c(1e-3)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LambdaRule::CrossValidated {
            folds,
            path_length,
            path_min_ratio,
        } = self.lambda
        {
            if folds < 2 {
                return Err(Error::InvalidParameter(format!("folds = {folds} < 2")));
            }
            if path_length < 1 {
                return Err(Error::InvalidParameter("empty lambda path".into()));
            }
            if !(path_min_ratio > T::zero() && path_min_ratio < T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "path_min_ratio {path_min_ratio} outside (0, 1)"
                )));
            }
        }
        if let LambdaRule::Fixed(l) = self.lambda {
            if !(l >= T::zero()) {
                return Err(Error::InvalidParameter(format!("lambda {l} < 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit<T> {
    pub beta: Vec<T>,
    pub lambda_used: T,
    /// Full sweeps performed.
    pub n_iters: usize,
    pub converged: bool,
    /// Largest KKT violation at the returned coefficients.
    pub kkt_residual: T,
}

fn soft_threshold<T: Real>(z: T, t: T) -> T {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        T::zero()
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Minimiser of `c1·b1² + c2·b2² + 2c·b1·b2 − 2g1·b1 − 2g2·b2 + 2h(|b1| + |b2|)`.
///
/// Each candidate is the stationary point on one face of the sign pattern;
/// the smallest objective among the consistent ones wins, earlier on ties.
fn pair_minimiser<T: Real>(g1: T, g2: T, c1: T, c2: T, c: T, h: T) -> (T, T) {
    let zero = T::zero();
    let two = T::c(2.0);
    let obj = |b1: T, b2: T| {
        c1 * b1 * b1 + c2 * b2 * b2 + two * c * b1 * b2 - two * (g1 * b1 + g2 * b2) + two * h * (b1.abs() + b2.abs())
    };
    let mut best = (zero, zero);
    let mut best_obj = zero;
    let mut consider = |b1: T, b2: T| {
        let o = obj(b1, b2);
        if o < best_obj {
            best = (b1, b2);
            best_obj = o;
        }
    };
    if c1 > zero {
        consider(soft_threshold(g1, h) / c1, zero);
    }
    if c2 > zero {
        consider(zero, soft_threshold(g2, h) / c2);
    }
    let det = c1 * c2 - c * c;
    if det > T::c(1e-10) * c1 * c2 {
        for s1 in [T::one(), -T::one()] {
            for s2 in [T::one(), -T::one()] {
                let r1 = g1 - h * s1;
                let r2 = g2 - h * s2;
                let b1 = (c2 * r1 - c * r2) / det;
                let b2 = (c1 * r2 - c * r1) / det;
                if b1 * s1 > zero && b2 * s2 > zero {
                    consider(b1, b2);
                }
            }
        }
    }
    best
}

/// Column-major Lasso problem with optional knockoff pairing.
#[derive(Debug, Clone)]
pub struct LassoProblem<T> {
    cols: Vec<Vec<T>>,
    y: Vec<T>,
    n: usize,
    /// `‖X_j‖² / n`
    col_sq: Vec<T>,
    groups: Vec<(usize, Option<usize>)>,
    /// `X_aᵀX_b / n` for each pair `(a, b)`, stored at index `a`.
    cross: Vec<T>,
}

impl<T: Real> LassoProblem<T> {
    pub fn new(x: &Matrix<T>, y: &[T]) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if x.rows() == 0 {
            return Err(Error::EmptyData);
        }
        Ok(Self::from_columns(x.columns(), y.to_vec()))
    }

    fn from_columns(cols: Vec<Vec<T>>, y: Vec<T>) -> Self {
        let n = y.len();
        let nf = T::from_usize_lossy(n);
        let col_sq = cols.iter().map(|c| dot(c, c) / nf).collect();
        let groups = (0..cols.len()).map(|j| (j, None)).collect();
        Self {
            cols,
            y,
            n,
            col_sq,
            groups,
            cross: Vec::new(),
        }
    }

    /// Treats columns `j` and `j + p` as a knockoff pair, `p = m / 2`.
    pub fn paired(mut self) -> Result<Self> {
        let m = self.cols.len();
        if m % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "paired design needs an even column count, got {m}"
            )));
        }
        let p = m / 2;
        self.groups = (0..p).map(|j| (j, Some(j + p))).collect();
        self.refresh_cross();
        Ok(self)
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }

    fn subset(&self, rows: &[usize]) -> Self {
        let cols = self
            .cols
            .iter()
            .map(|c| rows.iter().map(|&i| c[i]).collect())
            .collect();
        let y = rows.iter().map(|&i| self.y[i]).collect();
        let mut sub = Self::from_columns(cols, y);
        sub.groups = self.groups.clone();
        sub.refresh_cross();
        sub
    }

    fn refresh_cross(&mut self) {
        let nf = T::from_usize_lossy(self.n);
        self.cross = vec![T::zero(); self.cols.len()];
        for &(a, b) in &self.groups {
            if let Some(b) = b {
                self.cross[a] = dot(&self.cols[a], &self.cols[b]) / nf;
            }
        }
    }

    /// `x_iᵀβ`, summed pair by pair so that swapping partners leaves it unchanged.
    fn predict_row(&self, i: usize, beta: &[T]) -> T {
        let mut s = T::zero();
        for &(a, b) in &self.groups {
            let mut term = self.cols[a][i] * beta[a];
            if let Some(b) = b {
                term = term + self.cols[b][i] * beta[b];
            }
            s = s + term;
        }
        s
    }

    fn residual(&self, beta: &[T]) -> Vec<T> {
        if beta.iter().all(|&b| b == T::zero()) {
            return self.y.clone();
        }
        (0..self.n).map(|i| self.y[i] - self.predict_row(i, beta)).collect()
    }

    /// `2·max_j |X_jᵀy| / n`: the smallest λ whose solution is identically zero.
    pub fn lambda_max(&self) -> T {
        let nf = T::from_usize_lossy(self.n);
        self.cols
            .iter()
            .map(|c| (T::c(2.0) * dot(c, &self.y) / nf).abs())
            .fold(T::zero(), T::max)
    }

    /// Log-spaced decreasing path from `λ_max` to `min_ratio·λ_max`.
    pub fn lambda_path(&self, length: usize, min_ratio: T) -> Vec<T> {
        let lmax = self.lambda_max();
        if length == 1 {
            return vec![lmax];
        }
        let step = min_ratio.ln() / T::from_usize_lossy(length - 1);
        (0..length)
            .map(|k| {
                if k == 0 {
                    lmax
                } else if k == length - 1 {
                    lmax * min_ratio
                } else {
                    lmax * (step * T::from_usize_lossy(k)).exp()
                }
            })
            .collect()
    }

    pub fn objective(&self, beta: &[T], lambda: T) -> T {
        let r = self.residual(beta);
        self.objective_from_residual(&r, beta, lambda)
    }

    fn objective_from_residual(&self, r: &[T], beta: &[T], lambda: T) -> T {
        let nf = T::from_usize_lossy(self.n);
        dot(r, r) / nf + lambda * beta.iter().map(|b| b.abs()).sum::<T>()
    }

    /// Largest KKT violation of `beta` at `lambda`.
    pub fn kkt_residual(&self, beta: &[T], lambda: T) -> T {
        let r = self.residual(beta);
        self.kkt_from_residual(&r, beta, lambda)
    }

    fn kkt_from_residual(&self, r: &[T], beta: &[T], lambda: T) -> T {
        let nf = T::from_usize_lossy(self.n);
        let two = T::c(2.0);
        self.cols
            .iter()
            .zip(beta)
            .map(|(c, &b)| {
                let g = two * dot(c, r) / nf;
                if b != T::zero() {
                    (lambda * b.signum() - g).abs()
                } else {
                    (g.abs() - lambda).max(T::zero())
                }
            })
            .fold(T::zero(), T::max)
    }

    fn partial_corr(&self, j: usize, r: &[T], beta: &[T]) -> T {
        dot(&self.cols[j], r) / T::from_usize_lossy(self.n) + self.col_sq[j] * beta[j]
    }

    fn apply(&self, j: usize, z: T, half_lambda: T, r: &mut [T], beta: &mut [T]) -> T {
        let new = if self.col_sq[j] > T::zero() {
            soft_threshold(z, half_lambda) / self.col_sq[j]
        } else {
            T::zero()
        };
        let delta = new - beta[j];
        if delta != T::zero() {
            for (ri, &xij) in r.iter_mut().zip(&self.cols[j]) {
                *ri = *ri - xij * delta;
            }
            beta[j] = new;
        }
        delta.abs()
    }

    fn update_group(&self, g: (usize, Option<usize>), half_lambda: T, r: &mut [T], beta: &mut [T]) -> T {
        match g {
            (a, None) => {
                let z = self.partial_corr(a, r, beta);
                self.apply(a, z, half_lambda, r, beta)
            }
            (a, Some(b)) => {
                // Exact minimisation over the pair, evaluated in an order fixed
                // by the data so that swapping the two columns mirrors the result.
                let c = self.cross[a];
                let ga = self.partial_corr(a, r, beta) + c * beta[b];
                let gb = self.partial_corr(b, r, beta) + c * beta[a];
                let (first, second, g1, g2) = if ga.abs() > gb.abs() || (ga.abs() == gb.abs() && a < b) {
                    (a, b, ga, gb)
                } else {
                    (b, a, gb, ga)
                };
                let (n1, n2) = pair_minimiser(g1, g2, self.col_sq[first], self.col_sq[second], c, half_lambda);
                let d1 = n1 - beta[first];
                let d2 = n2 - beta[second];
                if d1 != T::zero() || d2 != T::zero() {
                    let (x1, x2) = (&self.cols[first], &self.cols[second]);
                    for i in 0..r.len() {
                        r[i] = r[i] - (x1[i] * d1 + x2[i] * d2);
                    }
                    beta[first] = n1;
                    beta[second] = n2;
                }
                d1.abs().max(d2.abs())
            }
        }
    }

    fn sweep(&self, groups: &[(usize, Option<usize>)], half_lambda: T, r: &mut [T], beta: &mut [T]) -> T {
        groups
            .iter()
            .map(|&g| self.update_group(g, half_lambda, r, beta))
            .fold(T::zero(), T::max)
    }

    /// Coordinate descent from `beta` (updated in place).
    pub fn solve_from(&self, lambda: T, beta: &mut [T], cfg: &LassoConfig<T>) -> Result<LassoFit<T>> {
        self.solve_inner(lambda, beta, cfg, true)
    }

    fn solve_loose(&self, lambda: T, beta: &mut [T], cfg: &LassoConfig<T>) -> Result<LassoFit<T>> {
        self.solve_inner(lambda, beta, cfg, false)
    }

    fn solve_inner(&self, lambda: T, beta: &mut [T], cfg: &LassoConfig<T>, strict: bool) -> Result<LassoFit<T>> {
        if beta.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: beta.len(),
            });
        }
        if !(lambda >= T::zero()) {
            return Err(Error::InvalidParameter(format!("lambda {lambda} < 0")));
        }
        let half = lambda / T::c(2.0);
        let kkt_tol = cfg.tol * T::c(5.0);
        let tol = if strict {
            cfg.tol
        } else {
            (cfg.path_tol * dot(&self.y, &self.y) / T::from_usize_lossy(self.n)).sqrt()
        };
        let mut r = self.residual(beta);
        let mut iters = 0usize;
        let mut converged = false;
        let mut kkt = T::infinity();

        let tracked = |r: &[T], beta: &[T], prev: &mut T| {
            if cfg!(debug_assertions) {
                let obj = self.objective_from_residual(r, beta, lambda);
                let slack = T::epsilon().sqrt() * (T::one() + prev.abs());
                debug_assert!(
                    obj <= *prev + slack,
                    "lasso objective increased: {prev} -> {obj}"
                );
                *prev = obj;
            }
        };
        let mut prev_obj = T::infinity();

        while iters < cfg.max_iters {
            let change = self.sweep(&self.groups, half, &mut r, beta);
            iters += 1;
            tracked(&r, beta, &mut prev_obj);
            if change <= tol {
                if !strict {
                    converged = true;
                    break;
                }
                kkt = self.kkt_from_residual(&r, beta, lambda);
                if kkt <= kkt_tol {
                    converged = true;
                    break;
                }
            }
            let active: Vec<_> = self
                .groups
                .iter()
                .copied()
                .filter(|&(a, b)| beta[a] != T::zero() || b.is_some_and(|b| beta[b] != T::zero()))
                .collect();
            if active.is_empty() {
                continue;
            }
            for _ in 0..cfg.max_iters {
                let change = self.sweep(&active, half, &mut r, beta);
                tracked(&r, beta, &mut prev_obj);
                if change <= tol {
                    break;
                }
            }
        }
        if !converged || !strict {
            kkt = self.kkt_from_residual(&r, beta, lambda);
        }
        if !converged {
            debug!("lasso did not converge in {iters} full sweeps (kkt {kkt})");
        }
        Ok(LassoFit {
            beta: beta.to_vec(),
            lambda_used: lambda,
            n_iters: iters,
            converged,
            kkt_residual: kkt,
        })
    }

    pub fn solve(&self, lambda: T, cfg: &LassoConfig<T>) -> Result<LassoFit<T>> {
        let mut beta = vec![T::zero(); self.n_features()];
        self.solve_from(lambda, &mut beta, cfg)
    }

    /// Warm-started fits along a decreasing path.
    pub fn solve_path(&self, lambdas: &[T], cfg: &LassoConfig<T>) -> Result<Vec<LassoFit<T>>> {
        let mut beta = vec![T::zero(); self.n_features()];
        lambdas
            .iter()
            .map(|&l| self.solve_from(l, &mut beta, cfg))
            .collect()
    }

    /// Warm-started fits along the configured path on the full data, stopped
    /// once the fit explains 99.9% of the null deviance or (after five values)
    /// improves the explained fraction by less than a relative 1e-5.
    pub fn truncated_path(&self, cfg: &LassoConfig<T>) -> Result<(Vec<T>, Vec<LassoFit<T>>)> {
        let (len, ratio) = cfg.path_params();
        let path = self.lambda_path(len, ratio);
        let null = dot(&self.y, &self.y);
        let mut beta = vec![T::zero(); self.n_features()];
        let mut fits = Vec::with_capacity(path.len());
        let mut prev_rsq = T::zero();
        for &l in &path {
            let fit = self.solve_loose(l, &mut beta, cfg)?;
            fits.push(fit);
            if !(null > T::zero()) {
                break;
            }
            let r = self.residual(&beta);
            let rsq = T::one() - dot(&r, &r) / null;
            if rsq > T::c(PATH_MAX_RSQ) || (fits.len() >= PATH_MIN_LEN && rsq - prev_rsq < T::c(PATH_MIN_GAIN) * rsq) {
                break;
            }
            prev_rsq = rsq;
        }
        let kept = path[..fits.len()].to_vec();
        Ok((kept, fits))
    }

    /// λ from the (truncated) path minimising out-of-fold squared error.
    ///
    /// Rows are shuffled by `rng` and split into contiguous folds. Ties go to
    /// the larger λ.
    pub fn cv_select(&self, cfg: &LassoConfig<T>, rng: &mut RngStream) -> Result<T> {
        cfg.validate()?;
        if let LambdaRule::Fixed(l) = cfg.lambda {
            return Ok(l);
        }
        let (path, _) = self.truncated_path(cfg)?;
        Ok(path[self.cv_best_index(&path, cfg, rng)?])
    }

    fn cv_best_index(&self, path: &[T], cfg: &LassoConfig<T>, rng: &mut RngStream) -> Result<usize> {
        let folds = match cfg.lambda {
            LambdaRule::CrossValidated { folds, .. } => folds,
            LambdaRule::Fixed(_) => return Ok(0),
        };
        if self.n < folds {
            return Err(Error::InsufficientLength {
                needed: folds,
                got: self.n,
            });
        }
        let mut perm: Vec<usize> = (0..self.n).collect();
        rng.shuffle(&mut perm);

        let mut sse = vec![T::zero(); path.len()];
        let base = self.n / folds;
        let extra = self.n % folds;
        let mut start = 0;
        for f in 0..folds {
            let size = base + usize::from(f < extra);
            let mut held: Vec<usize> = perm[start..start + size].to_vec();
            start += size;
            held.sort_unstable();
            let mut in_fold = vec![false; self.n];
            for &i in &held {
                in_fold[i] = true;
            }
            let train: Vec<usize> = (0..self.n).filter(|&i| !in_fold[i]).collect();
            let train_problem = self.subset(&train);
            let mut beta = vec![T::zero(); self.n_features()];
            for (k, &l) in path.iter().enumerate() {
                train_problem.solve_loose(l, &mut beta, cfg)?;
                let err: T = held
                    .iter()
                    .map(|&i| {
                        let e = self.y[i] - self.predict_row(i, &beta);
                        e * e
                    })
                    .sum();
                sse[k] = sse[k] + err;
            }
        }
        let mut best = 0;
        for k in 1..path.len() {
            if sse[k] < sse[best] {
                best = k;
            }
        }
        Ok(best)
    }

    /// Fit at the configured λ. Under cross-validation the full-data path fit
    /// at the selected λ is polished to the strict tolerance.
    pub fn fit(&self, cfg: &LassoConfig<T>, rng: &mut RngStream) -> Result<LassoFit<T>> {
        cfg.validate()?;
        match cfg.lambda {
            LambdaRule::Fixed(l) => self.solve(l, cfg),
            LambdaRule::CrossValidated { .. } => {
                let (path, fits) = self.truncated_path(cfg)?;
                let best = self.cv_best_index(&path, cfg, rng)?;
                let mut beta = fits[best].beta.clone();
                self.solve_from(path[best], &mut beta, cfg)
            }
        }
    }
}

const PATH_MAX_RSQ: f64 = 0.999;
const PATH_MIN_GAIN: f64 = 1e-5;
const PATH_MIN_LEN: usize = 5;

/// Single fit at a fixed λ with cyclic coordinate order.
pub fn coordinate_descent<T: Real>(
    x: &Matrix<T>,
    y: &[T],
    lambda: T,
    cfg: &LassoConfig<T>,
) -> Result<LassoFit<T>> {
    LassoProblem::new(x, y)?.solve(lambda, cfg)
}

pub fn lambda_path<T: Real>(x: &Matrix<T>, y: &[T], cfg: &LassoConfig<T>) -> Result<Vec<T>> {
    let (len, ratio) = cfg.path_params();
    Ok(LassoProblem::new(x, y)?.lambda_path(len, ratio))
}

pub fn cv_select_lambda<T: Real>(
    x: &Matrix<T>,
    y: &[T],
    cfg: &LassoConfig<T>,
    rng: &mut RngStream,
) -> Result<T> {
    LassoProblem::new(x, y)?.cv_select(cfg, rng)
}
