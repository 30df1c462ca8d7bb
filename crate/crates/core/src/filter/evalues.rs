use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Knockoff threshold `T`; `Infinite` when no candidate satisfies the ratio bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Threshold<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Threshold::Finite(_))
    }

    pub fn value(&self) -> Option<T> {
        match *self {
            Threshold::Finite(t) => Some(t),
            Threshold::Infinite => None,
        }
    }

    /// `w ≥ T`, false for every `w` when `T` is infinite.
    pub fn admits(&self, w: T) -> bool {
        matches!(*self, Threshold::Finite(t) if w >= t)
    }
}

/// Signed statistics for one (sub)sample together with their threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnockoffStats<T> {
    pub w: Vec<T>,
    pub threshold: Threshold<T>,
}

impl<T: Real> KnockoffStats<T> {
    pub fn new(w: Vec<T>, tau1: f64) -> Self {
        let threshold = knockoff_threshold(&w, tau1);
        Self { w, threshold }
    }

    /// `{j : w_j ≥ T}`.
    pub fn selected(&self) -> Vec<usize> {
        (0..self.w.len()).filter(|&j| self.threshold.admits(self.w[j])).collect()
    }
}

/// The `q + 1` interleaved blocks `H_k = {k, k + (q+1), k + 2(q+1), …}` (0-based).
pub fn subsample_indices(n: usize, q: usize) -> Result<Vec<Vec<usize>>> {
    if n < q + 1 {
        return Err(Error::TooFewObservations { n, needed: q + 1 });
    }
    Ok((0..=q).map(|k| (k..n).step_by(q + 1).collect()).collect())
}

/// `min{t ∈ W₊ : (1 + #{w ≤ −t}) / max(#{w ≥ t}, 1) ≤ τ₁}` over `W₊ = {|w_j| > 0}`.
pub fn knockoff_threshold<T: Real>(w: &[T], tau1: f64) -> Threshold<T> {
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let mut candidates: Vec<T> = w.iter().map(|v| v.abs()).filter(|&a| a > T::zero()).collect();
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    candidates.dedup();
    let p = sorted.len();
    for t in candidates {
        let neg = sorted.partition_point(|&v| v <= -t);
        let pos = p - sorted.partition_point(|&v| v < t);
        let ratio = (1 + neg) as f64 / pos.max(1) as f64;
        if ratio <= tau1 {
            return Threshold::Finite(t);
        }
    }
    Threshold::Infinite
}

/// `e_j = p·1{w_j ≥ T} / (1 + #{w ≤ −T})`; all zero when `T` is infinite.
pub fn evalues_single<T: Real>(w: &[T], threshold: Threshold<T>) -> Vec<T> {
    let Threshold::Finite(t) = threshold else {
        return vec![T::zero(); w.len()];
    };
    let neg = w.iter().filter(|&&v| v <= -t).count();
    let e = T::from_usize_lossy(w.len()) / T::from_usize_lossy(1 + neg);
    w.iter().map(|&v| if v >= t { e } else { T::zero() }).collect()
}

/// Coordinatewise mean.
pub fn aggregate_evalues<T: Real>(parts: &[Vec<T>]) -> Result<Vec<T>> {
    let first = parts.first().ok_or(Error::EmptyData)?;
    let p = first.len();
    let mut out = vec![T::zero(); p];
    for e in parts {
        if e.len() != p {
            return Err(Error::LengthMismatch(p, e.len()));
        }
        for (o, &v) in out.iter_mut().zip(e) {
            *o = *o + v;
        }
    }
    let k = T::from_usize_lossy(parts.len());
    Ok(out.into_iter().map(|v| v / k).collect())
}

/// e-BH at level `τ*`: returns the selected indices (ascending) and `k̂`.
pub fn ebh_select<T: Real>(e: &[T], tau_star: f64) -> (Vec<usize>, usize) {
    let p = e.len();
    let pf = T::from_usize_lossy(p);
    let tau = T::c(tau_star);
    let mut desc = e.to_vec();
    desc.sort_by(|a, b| b.partial_cmp(a).expect("finite e-values"));
    let k_hat = (1..=p)
        .rev()
        .find(|&k| desc[k - 1] >= pf / (tau * T::from_usize_lossy(k)))
        .unwrap_or(0);
    if k_hat == 0 {
        return (Vec::new(), 0);
    }
    let cut = pf / (tau * T::from_usize_lossy(k_hat));
    ((0..p).filter(|&j| e[j] >= cut).collect(), k_hat)
}
