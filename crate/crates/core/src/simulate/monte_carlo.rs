use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{fdp_power, simulate, DgpSpec};
use crate::error::{Error, Result};
use crate::filter::{tski_run, TskiConfig};
use crate::knockoffs::{FittedGaussianSampler, ShrinkageConfig};
use crate::numerics::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub dgp: DgpSpec,
    pub tski: TskiConfig<f64>,
    pub shrinkage: ShrinkageConfig,
    pub reps: usize,
    pub master_seed: u64,
}

impl McConfig {
    pub fn new(dgp: DgpSpec, tski: TskiConfig<f64>, reps: usize, master_seed: u64) -> Self {
        Self {
            dgp,
            tski,
            shrinkage: ShrinkageConfig::conditioned(),
            reps,
            master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub fdp: f64,
    pub power: f64,
    /// Selected covariates, 1-based.
    pub selected: Vec<usize>,
    /// `∩ ⊆ Ŝ ⊆ ∪` of the per-subsample selections (vacuous when `Ŝ = ∅`).
    pub sandwich_ok: bool,
    pub max_kkt_residual: Option<f64>,
    pub infinite_thresholds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: McConfig,
    pub reps: usize,
    pub failed: usize,
    pub failures: Vec<(usize, String)>,
    pub fdp_per_rep: Vec<f64>,
    pub power_per_rep: Vec<f64>,
    pub fdr: f64,
    pub power: f64,
    pub sandwich_violations: usize,
    pub max_kkt_residual: Option<f64>,
    pub outcomes: Vec<RepOutcome>,
}

pub const CSV_HEADER: &str = "model,n,beta,q,stat,tau1,tau_star,fdr,power,reps,failed";

impl McReport {
    pub fn csv_row(&self) -> String {
        let c = &self.config;
        format!(
            "{},{},{},{},{},{},{},{:.16e},{:.16e},{},{}",
            c.dgp.model.name(),
            c.dgp.n,
            c.dgp.beta,
            c.tski.q,
            c.tski.statistic.name(),
            c.tski.resolved_tau1(),
            c.tski.tau_star,
            self.fdr,
            self.power,
            self.reps,
            self.failed
        )
    }
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

/// One replication: fresh data from stream `(master_seed, rep)`, knockoff
/// model refit on that replication's covariates, then the filter.
pub fn run_replication(cfg: &McConfig, rep: usize) -> Result<RepOutcome> {
    let root = RngStream::new(cfg.master_seed, rep as u64);
    let data = simulate(&cfg.dgp, &mut root.derive(0))?;
    let sampler = FittedGaussianSampler {
        shrinkage: cfg.shrinkage,
    };
    let res = tski_run(&data.y, &data.x, &sampler, &cfg.tski, &root.derive(1))?;
    let (fdp, power) = fdp_power(&res.selected, &data.s0, &data.h0);
    let sandwich_ok =
        res.selected.is_empty() || (is_subset(&res.intersection(), &res.selected) && is_subset(&res.selected, &res.union()));
    Ok(RepOutcome {
        rep,
        fdp,
        power,
        selected: res.selected.iter().map(|j| j + 1).collect(),
        sandwich_ok,
        max_kkt_residual: res.max_kkt_residual(),
        infinite_thresholds: res.per_subsample.iter().filter(|s| !s.finite_threshold()).count(),
    })
}

/// Runs `cfg.reps` replications on a pool of `workers` threads. Output is
/// independent of `workers`.
pub fn monte_carlo(cfg: &McConfig, workers: usize) -> Result<McReport> {
    if cfg.reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let results: Vec<(usize, Result<RepOutcome>)> =
        pool.install(|| (0..cfg.reps).into_par_iter().map(|r| (r, run_replication(cfg, r))).collect());
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results {
        match res {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                log::warn!("replication {r} failed: {e}");
                failures.push((r, e.to_string()));
            }
        }
    }
    let fdp_per_rep: Vec<f64> = outcomes.iter().map(|o| o.fdp).collect();
    let power_per_rep: Vec<f64> = outcomes.iter().map(|o| o.power).collect();
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(McReport {
        config: cfg.clone(),
        reps: cfg.reps,
        failed: failures.len(),
        failures,
        fdr: mean(&fdp_per_rep),
        power: mean(&power_per_rep),
        fdp_per_rep,
        power_per_rep,
        sandwich_violations: outcomes.iter().filter(|o| !o.sandwich_ok).count(),
        max_kkt_residual: outcomes.iter().filter_map(|o| o.max_kkt_residual).reduce(f64::max),
        outcomes,
    })
}
