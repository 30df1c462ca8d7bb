//! Regression random forest and the swap-based MDA knockoff statistic.
//!
//! All randomness (bootstrap rows, candidate features) is keyed by the forest
//! seed, the tree index and the node's path from the root. It never depends on
//! feature values, so relabelling the columns relabels the fitted forest.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{splitmix64, Matrix, RngStream};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per node; `None` means `⌈m/3⌉`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            mtry: None,
            min_leaf: 5,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn resolved_mtry(&self, m: usize) -> usize {
        self.mtry.unwrap_or_else(|| m.div_ceil(3)).clamp(1, m.max(1))
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be positive".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidParameter("min_leaf must be positive".into()));
        }
        if let Some(k) = self.mtry {
            if k == 0 || k > m {
                return Err(Error::InvalidParameter(format!("mtry {k} outside 1..={m}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<T> {
    Leaf {
        value: T,
    },
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Real> Tree<T> {
    pub fn leaf(value: T) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, z: &[T]) -> T {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if z[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest<T> {
    pub trees: Vec<Tree<T>>,
    pub config: ForestConfig,
    pub seed: u64,
    pub n_features: usize,
}

/// How candidate features are drawn at each node.
#[derive(Debug, Clone, Copy)]
enum Sampling {
    Plain,
    /// Draw knockoff pairs `(k, k + p)` and offer both members.
    Pairs(usize),
}

struct Builder<'a, T> {
    z: &'a Matrix<T>,
    v: &'a [T],
    cfg: ForestConfig,
    mtry: usize,
    sampling: Sampling,
}

struct Candidate<T> {
    score: T,
    threshold: T,
    feature: usize,
    split_at: usize,
}

impl<T: Real> Builder<'_, T> {
    fn candidates(&self, rng: &mut RngStream) -> Vec<usize> {
        let m = self.z.cols();
        match self.sampling {
            Sampling::Plain => rng.choose_distinct(m, self.mtry),
            Sampling::Pairs(p) => {
                let pairs = self.mtry.div_ceil(2).min(p);
                rng.choose_distinct(p, pairs)
                    .into_iter()
                    .flat_map(|k| [k, k + p])
                    .collect()
            }
        }
    }

    /// Best split on one feature among `rows`: maximises `S_L²/n_L + S_R²/n_R`.
    fn best_on_feature(&self, feature: usize, rows: &[usize], sorted: &mut Vec<(T, T)>) -> Option<Candidate<T>> {
        sorted.clear();
        sorted.extend(rows.iter().map(|&i| (self.z[(i, feature)], self.v[i])));
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        let n = sorted.len();
        let total: T = sorted.iter().map(|&(_, y)| y).sum();
        let leaf = self.cfg.min_leaf;
        let mut left_sum = T::zero();
        let mut best: Option<Candidate<T>> = None;
        for k in 1..n {
            left_sum = left_sum + sorted[k - 1].1;
            if k < leaf || n - k < leaf || !(sorted[k - 1].0 < sorted[k].0) {
                continue;
            }
            let nl = T::from_usize_lossy(k);
            let nr = T::from_usize_lossy(n - k);
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / nl + right_sum * right_sum / nr;
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(Candidate {
                    score,
                    threshold: (sorted[k - 1].0 + sorted[k].0) / T::c(2.0),
                    feature,
                    split_at: k,
                });
            }
        }
        best
    }

    fn build(&self, tree_rng: &RngStream, rows: Vec<usize>) -> Tree<T> {
        let mut nodes = Vec::new();
        // (rows, path key, slot to patch in parent)
        let mut stack: Vec<(Vec<usize>, u64, Option<(usize, bool)>)> = vec![(rows, 1, None)];
        let mut sorted = Vec::new();
        while let Some((rows, path, parent)) = stack.pop() {
            let id = nodes.len();
            if let Some((pid, is_left)) = parent {
                if let Node::Split { left, right, .. } = &mut nodes[pid] {
                    if is_left {
                        *left = id;
                    } else {
                        *right = id;
                    }
                }
            }
            let n = rows.len();
            let sum: T = rows.iter().map(|&i| self.v[i]).sum();
            let mean = sum / T::from_usize_lossy(n.max(1));
            let first = rows.first().map(|&i| self.v[i]);
            let constant = rows.iter().all(|&i| Some(self.v[i]) == first);
            if n < 2 * self.cfg.min_leaf || constant {
                nodes.push(Node::Leaf { value: mean });
                continue;
            }
            let mut node_rng = tree_rng.derive(path);
            let mut best: Option<Candidate<T>> = None;
            for f in self.candidates(&mut node_rng) {
                if let Some(c) = self.best_on_feature(f, &rows, &mut sorted) {
                    let better = match &best {
                        None => true,
                        Some(b) => c.score > b.score || (c.score == b.score && c.threshold < b.threshold),
                    };
                    if better {
                        best = Some(c);
                    }
                }
            }
            let Some(best) = best else {
                nodes.push(Node::Leaf { value: mean });
                continue;
            };
            let (mut left_rows, mut right_rows) = (Vec::with_capacity(best.split_at), Vec::new());
            for &i in &rows {
                if self.z[(i, best.feature)] <= best.threshold {
                    left_rows.push(i);
                } else {
                    right_rows.push(i);
                }
            }
            debug_assert_eq!(left_rows.len(), best.split_at);
            nodes.push(Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left: usize::MAX,
                right: usize::MAX,
            });
            stack.push((right_rows, splitmix64(path.wrapping_mul(2).wrapping_add(1)), Some((id, false))));
            stack.push((left_rows, splitmix64(path.wrapping_mul(2)), Some((id, true))));
        }
        Tree { nodes }
    }
}

fn fit_impl<T: Real>(
    z: &Matrix<T>,
    v: &[T],
    cfg: &ForestConfig,
    rng: &mut RngStream,
    sampling: Sampling,
) -> Result<Forest<T>> {
    let (n, m) = z.shape();
    if n < 2 || m == 0 {
        return Err(Error::EmptyData);
    }
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    cfg.validate(m)?;
    let seed = rand::RngCore::next_u64(rng);
    let builder = Builder {
        z,
        v,
        cfg: *cfg,
        mtry: cfg.resolved_mtry(m),
        sampling,
    };
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_rng = RngStream::new(seed, t as u64);
            let rows = if cfg.bootstrap {
                let mut boot = tree_rng.derive(0);
                (0..n).map(|_| boot.below(n)).collect()
            } else {
                (0..n).collect()
            };
            builder.build(&tree_rng, rows)
        })
        .collect();
    Ok(Forest {
        trees,
        config: *cfg,
        seed,
        n_features: m,
    })
}

/// Fits a forest with plain per-node feature subsampling.
pub fn fit_forest<T: Real>(z: &Matrix<T>, v: &[T], cfg: &ForestConfig, rng: &mut RngStream) -> Result<Forest<T>> {
    fit_impl(z, v, cfg, rng, Sampling::Plain)
}

/// Fits a forest on an augmented design `[U, Ũ]`, sampling whole knockoff
/// pairs at each node (`⌈mtry/2⌉` pairs, both members offered).
pub fn fit_forest_paired<T: Real>(
    z: &Matrix<T>,
    v: &[T],
    cfg: &ForestConfig,
    rng: &mut RngStream,
) -> Result<Forest<T>> {
    if z.cols() % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "paired design needs an even column count, got {}",
            z.cols()
        )));
    }
    fit_impl(z, v, cfg, rng, Sampling::Pairs(z.cols() / 2))
}

impl<T: Real> Forest<T> {
    pub fn predict(&self, z: &[T]) -> Result<T> {
        if z.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: z.len(),
            });
        }
        Ok(self.predict_unchecked(z))
    }

    fn predict_unchecked(&self, z: &[T]) -> T {
        let s: T = self.trees.iter().map(|t| t.predict(z)).sum();
        s / T::from_usize_lossy(self.trees.len())
    }

    pub fn from_trees(trees: Vec<Tree<T>>, n_features: usize) -> Self {
        Self {
            trees,
            config: ForestConfig::default(),
            seed: 0,
            n_features,
        }
    }
}

/// MDA statistic: for each `j`, the mean increase in squared error when `u_j`
/// is replaced by `ũ_j`, minus the increase when `ũ_j` is replaced by `u_j`.
pub fn mda_statistics<T: Real>(forest: &Forest<T>, u: &Matrix<T>, u_tilde: &Matrix<T>, v: &[T]) -> Result<Vec<T>> {
    let (n, p) = u.shape();
    if u_tilde.shape() != (n, p) {
        return Err(Error::DimensionMismatch {
            expected: n * p,
            got: u_tilde.rows() * u_tilde.cols(),
        });
    }
    if forest.n_features != 2 * p {
        return Err(Error::DimensionMismatch {
            expected: forest.n_features,
            got: 2 * p,
        });
    }
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let nf = T::from_usize_lossy(n);
    let w = (0..p)
        .into_par_iter()
        .map(|j| {
            let mut z = vec![T::zero(); 2 * p];
            let mut acc = T::zero();
            for i in 0..n {
                z[..p].copy_from_slice(u.row(i));
                z[p..].copy_from_slice(u_tilde.row(i));
                let (orig, knock) = (z[j], z[j + p]);
                z[j] = knock;
                let a = v[i] - forest.predict_unchecked(&z);
                z[j] = orig;
                z[j + p] = orig;
                let b = v[i] - forest.predict_unchecked(&z);
                acc = acc + (a * a - b * b);
            }
            acc / nf
        })
        .collect();
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize, m: usize, seed: u64) -> (Matrix<f64>, Vec<f64>) {
        let mut rng = RngStream::new(seed, 0);
        let z = Matrix::from_fn(n, m, |_, _| rng.normal());
        let v = (0..n).map(|i| 2.0 * z[(i, 0)] + 0.3 * rng.normal()).collect();
        (z, v)
    }

    #[test]
    fn huge_min_leaf_gives_mean() {
        let (z, v) = data(30, 4, 1);
        let cfg = ForestConfig {
            n_trees: 5,
            min_leaf: 30,
            bootstrap: false,
            ..Default::default()
        };
        let f = fit_forest(&z, &v, &cfg, &mut RngStream::new(0, 0)).unwrap();
        let mean = v.iter().sum::<f64>() / 30.0;
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
        assert!((f.predict(&[5.0, -3.0, 0.0, 1.0]).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn separable_indicator_fit() {
        let mut rng = RngStream::new(3, 0);
        let n = 200;
        let z = Matrix::from_fn(n, 6, |i, j| {
            if j == 0 {
                if i % 2 == 0 { 2.0 + rng.uniform() } else { -2.0 - rng.uniform() }
            } else {
                rng.normal()
            }
        });
        let v: Vec<f64> = (0..n).map(|i| if z[(i, 0)] > 0.0 { 1.0 } else { 0.0 }).collect();
        let cfg = ForestConfig {
            n_trees: 20,
            mtry: Some(6),
            ..Default::default()
        };
        let f = fit_forest(&z, &v, &cfg, &mut RngStream::new(1, 0)).unwrap();
        let mse: f64 = (0..n).map(|i| (v[i] - f.predict(z.row(i)).unwrap()).powi(2)).sum::<f64>() / n as f64;
        assert!(mse <= 0.05, "{mse}");
    }

    #[test]
    fn deterministic_given_seed() {
        let (z, v) = data(60, 6, 2);
        let cfg = ForestConfig {
            n_trees: 10,
            ..Default::default()
        };
        let a = fit_forest(&z, &v, &cfg, &mut RngStream::new(5, 5)).unwrap();
        let b = fit_forest(&z, &v, &cfg, &mut RngStream::new(5, 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pure_leaf_recovers_response() {
        let (z, v) = data(40, 3, 4);
        let cfg = ForestConfig {
            n_trees: 1,
            mtry: Some(3),
            min_leaf: 1,
            bootstrap: false,
        };
        let f = fit_forest(&z, &v, &cfg, &mut RngStream::new(0, 0)).unwrap();
        for i in 0..40 {
            assert_eq!(f.predict(z.row(i)).unwrap(), v[i]);
        }
    }

    #[test]
    fn predictions_within_response_range() {
        let (z, v) = data(80, 5, 6);
        let f = fit_forest(&z, &v, &ForestConfig { n_trees: 15, ..Default::default() }, &mut RngStream::new(2, 0)).unwrap();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut rng = RngStream::new(9, 9);
        for _ in 0..50 {
            let q: Vec<f64> = (0..5).map(|_| 3.0 * rng.normal()).collect();
            let y = f.predict(&q).unwrap();
            assert!(y >= lo && y <= hi);
        }
        assert!(f.predict(&[0.0; 4]).is_err());
    }

    #[test]
    fn constant_forest_gives_zero_mda() {
        let (z, v) = data(20, 6, 7);
        let f = Forest::from_trees(vec![Tree::leaf(0.7)], 6);
        let u = Matrix::from_fn(20, 3, |i, j| z[(i, j)]);
        let ut = Matrix::from_fn(20, 3, |i, j| z[(i, j + 3)]);
        assert_eq!(mda_statistics(&f, &u, &ut, &v).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn hand_built_identity_tree() {
        // On binary inputs this stump is exactly m̂(z) = z_1.
        let u = Matrix::<f64>::from_columns(&[vec![0.0, 1.0, 0.0, 1.0]]).unwrap();
        let ut = Matrix::from_columns(&[vec![1.0, 1.0, 0.0, 0.0]]).unwrap();
        let v = u.column(0);
        let tree = Tree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 1.0 },
            ],
        };
        let f = Forest::from_trees(vec![tree], 2);
        let w = mda_statistics(&f, &u, &ut, &v).unwrap();
        let expected: f64 = (0..4).map(|i| (v[i] - ut[(i, 0)]).powi(2)).sum::<f64>() / 4.0;
        assert_eq!(w[0], expected);
        assert!(w[0] >= 0.0);
    }

    #[test]
    fn exchanging_inputs_negates_mda() {
        let (z, v) = data(50, 8, 8);
        let f = fit_forest_paired(&z, &v, &ForestConfig { n_trees: 10, ..Default::default() }, &mut RngStream::new(1, 1)).unwrap();
        let u = Matrix::from_fn(50, 4, |i, j| z[(i, j)]);
        let ut = Matrix::from_fn(50, 4, |i, j| z[(i, j + 4)]);
        let w = mda_statistics(&f, &u, &ut, &v).unwrap();
        let mut u2 = u.clone();
        let mut ut2 = ut.clone();
        for i in 0..50 {
            u2[(i, 2)] = ut[(i, 2)];
            ut2[(i, 2)] = u[(i, 2)];
        }
        let w2 = mda_statistics(&f, &u2, &ut2, &v).unwrap();
        assert_eq!(w2[2], -w[2]);
    }

    #[test]
    fn retraining_after_swap_flips_sign() {
        let (z, v) = data(60, 10, 9);
        let cfg = ForestConfig { n_trees: 20, ..Default::default() };
        let split = |m: &Matrix<f64>| {
            (
                Matrix::from_fn(60, 5, |i, j| m[(i, j)]),
                Matrix::from_fn(60, 5, |i, j| m[(i, j + 5)]),
            )
        };
        let f = fit_forest_paired(&z, &v, &cfg, &mut RngStream::new(3, 0)).unwrap();
        let (u, ut) = split(&z);
        let w = mda_statistics(&f, &u, &ut, &v).unwrap();
        let mut zs = z.clone();
        zs.swap_columns(1, 6);
        let fs = fit_forest_paired(&zs, &v, &cfg, &mut RngStream::new(3, 0)).unwrap();
        let (us, uts) = split(&zs);
        let ws = mda_statistics(&fs, &us, &uts, &v).unwrap();
        for j in 0..5 {
            if j == 1 {
                assert_eq!(ws[j], -w[j]);
            } else {
                assert_eq!(ws[j], w[j]);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (z, v) = data(10, 3, 1);
        assert!(fit_forest(&Matrix::<f64>::zeros(1, 3), &[1.0], &ForestConfig::default(), &mut RngStream::new(0, 0)).is_err());
        assert!(fit_forest_paired(&z, &v, &ForestConfig::default(), &mut RngStream::new(0, 0)).is_err());
        let bad = ForestConfig { mtry: Some(9), ..Default::default() };
        assert!(fit_forest(&z, &v, &bad, &mut RngStream::new(0, 0)).is_err());
    }
}
