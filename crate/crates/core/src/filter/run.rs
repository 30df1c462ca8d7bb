use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::evalues::{aggregate_evalues, ebh_select, evalues_single, subsample_indices, KnockoffStats, Threshold};
use super::statistics::Statistic;
use crate::error::{Error, Result};
use crate::knockoffs::KnockoffSampler;
use crate::numerics::{Matrix, RngStream};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TskiConfig<T> {
    pub statistic: Statistic<T>,
    /// Number of skipped lags between rows of one subsample; `q + 1` subsamples.
    pub q: usize,
    /// Per-subsample level; `None` means `τ*/(q+1)`.
    pub tau1: Option<f64>,
    pub tau_star: f64,
}

impl<T: Real> TskiConfig<T> {
    pub fn new(statistic: Statistic<T>, q: usize, tau_star: f64) -> Self {
        Self {
            statistic,
            q,
            tau1: None,
            tau_star,
        }
    }

    pub fn resolved_tau1(&self) -> f64 {
        self.tau1.unwrap_or(self.tau_star / (self.q + 1) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |t: f64| t > 0.0 && t < 1.0;
        if !open_unit(self.tau_star) {
            return Err(Error::InvalidParameter(format!("tau_star {} outside (0, 1)", self.tau_star)));
        }
        if !open_unit(self.resolved_tau1()) {
            return Err(Error::InvalidParameter(format!("tau1 {} outside (0, 1)", self.resolved_tau1())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub q: usize,
    pub tau1: f64,
    pub tau_star: f64,
    pub statistic: String,
    pub seed: u64,
    pub stream_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleResult<T> {
    /// Row indices `H_k` (0-based).
    pub indices: Vec<usize>,
    pub stats: KnockoffStats<T>,
    pub evalues: Vec<T>,
    pub kkt_residual: Option<T>,
}

impl<T: Real> SubsampleResult<T> {
    pub fn finite_threshold(&self) -> bool {
        self.stats.threshold.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult<T> {
    /// Selected covariates (0-based, ascending).
    pub selected: Vec<usize>,
    pub evalues: Vec<T>,
    pub k_hat: usize,
    pub per_subsample: Vec<SubsampleResult<T>>,
    pub params: RunParams,
}

impl<T: Real> SelectionResult<T> {
    /// Covariates passing their own threshold in every subsample.
    pub fn intersection(&self) -> Vec<usize> {
        let p = self.evalues.len();
        (0..p)
            .filter(|&j| self.per_subsample.iter().all(|s| s.stats.threshold.admits(s.stats.w[j])))
            .collect()
    }

    pub fn max_kkt_residual(&self) -> Option<T> {
        self.per_subsample
            .iter()
            .filter_map(|s| s.kkt_residual)
            .reduce(T::max)
    }

    /// Covariates passing their own threshold in at least one subsample.
    pub fn union(&self) -> Vec<usize> {
        let p = self.evalues.len();
        (0..p)
            .filter(|&j| self.per_subsample.iter().any(|s| s.stats.threshold.admits(s.stats.w[j])))
            .collect()
    }

    /// JSON report; covariate and row indices are 1-based, an infinite
    /// threshold is written as `null`.
    pub fn to_json(&self) -> Value {
        let f = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<f64>>();
        let one_based = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<usize>>();
        json!({
            "selected": one_based(&self.selected),
            "k_hat": self.k_hat,
            "evalues": f(&self.evalues),
            "params": self.params,
            "subsamples": self.per_subsample.iter().enumerate().map(|(k, s)| json!({
                "k": k + 1,
                "rows": one_based(&s.indices),
                "threshold": s.stats.threshold.value().map(|t| t.to_f64_lossy()),
                "finite_threshold": s.finite_threshold(),
                "w": f(&s.stats.w),
                "evalues": f(&s.evalues),
            })).collect::<Vec<_>>(),
        })
    }
}

fn check_inputs<T: Real>(y: &[T], x: &Matrix<T>) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if x.cols() == 0 || x.rows() == 0 {
        return Err(Error::EmptyData);
    }
    Ok(())
}

fn params<T: Real>(cfg: &TskiConfig<T>, q: usize, tau1: f64, rng: &RngStream) -> RunParams {
    RunParams {
        q,
        tau1,
        tau_star: cfg.tau_star,
        statistic: cfg.statistic.name().to_string(),
        seed: rng.seed(),
        stream_id: rng.stream_id(),
    }
}

/// Subsampled knockoff inference with e-value aggregation.
///
/// Knockoffs are drawn once for the full sample from `rng.derive(0)`; the
/// statistic on subsample `k` uses `rng.derive(1 + k)`, so the result does not
/// depend on the number of worker threads.
pub fn tski_run<T: Real, S: KnockoffSampler<T> + ?Sized>(
    y: &[T],
    x: &Matrix<T>,
    sampler: &S,
    cfg: &TskiConfig<T>,
    rng: &RngStream,
) -> Result<SelectionResult<T>> {
    check_inputs(y, x)?;
    cfg.validate()?;
    let blocks = subsample_indices(x.rows(), cfg.q)?;
    let x_tilde = sampler.sample(x, &mut rng.derive(0))?;
    let tau1 = cfg.resolved_tau1();
    let per_subsample = blocks
        .into_par_iter()
        .enumerate()
        .map(|(k, rows)| {
            let u = x.select_rows(&rows);
            let ut = x_tilde.select_rows(&rows);
            let v: Vec<T> = rows.iter().map(|&i| y[i]).collect();
            let out = cfg.statistic.compute(&v, &u, &ut, &mut rng.derive(1 + k as u64))?;
            let stats = KnockoffStats::new(out.w, tau1);
            let evalues = evalues_single(&stats.w, stats.threshold);
            Ok(SubsampleResult {
                indices: rows,
                stats,
                evalues,
                kkt_residual: out.kkt_residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let parts: Vec<Vec<T>> = per_subsample.iter().map(|s| s.evalues.clone()).collect();
    let evalues = aggregate_evalues(&parts)?;
    let (selected, k_hat) = ebh_select(&evalues, cfg.tau_star);
    Ok(SelectionResult {
        selected,
        evalues,
        k_hat,
        per_subsample,
        params: params(cfg, cfg.q, tau1, rng),
    })
}

/// The plain knockoff filter on the full sample: `Ŝ = {j : W_j ≥ T}` at level
/// `τ*`. Uses the same random streams as [`tski_run`] with `q = 0`.
pub fn knockoff_filter_run<T: Real, S: KnockoffSampler<T> + ?Sized>(
    y: &[T],
    x: &Matrix<T>,
    sampler: &S,
    statistic: &Statistic<T>,
    tau_star: f64,
    rng: &RngStream,
) -> Result<SelectionResult<T>> {
    check_inputs(y, x)?;
    let cfg = TskiConfig::new(statistic.clone(), 0, tau_star);
    cfg.validate()?;
    let x_tilde = sampler.sample(x, &mut rng.derive(0))?;
    let out = statistic.compute(y, x, &x_tilde, &mut rng.derive(1))?;
    let stats = KnockoffStats::new(out.w, tau_star);
    let selected = stats.selected();
    let evalues = evalues_single(&stats.w, stats.threshold);
    let k_hat = if matches!(stats.threshold, Threshold::Infinite) { 0 } else { selected.len() };
    Ok(SelectionResult {
        k_hat,
        evalues: evalues.clone(),
        per_subsample: vec![SubsampleResult {
            indices: (0..x.rows()).collect(),
            stats,
            evalues,
            kkt_residual: out.kkt_residual,
        }],
        selected,
        params: params(&cfg, 0, tau_star, rng),
    })
}
