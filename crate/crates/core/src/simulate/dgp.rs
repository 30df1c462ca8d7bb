use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, Matrix, RngStream};

/// Number of exogenous series.
pub const N_EXOGENOUS: usize = 50;
/// Response lags in the covariate vector.
pub const Y_LAGS: usize = 20;
/// Lags of the exogenous block (`h_t` through `h_{t−4}`).
pub const H_LAGS: usize = 4;
/// Covariate dimension `20 + 50·5`.
pub const P: usize = Y_LAGS + N_EXOGENOUS * (H_LAGS + 1);

const H_AR: f64 = 0.2;
const H_INNOVATION_CORR: f64 = 0.2;
const N_ACTIVE_H: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DgpModel {
    /// Linear autoregression with exogenous inputs.
    Arx,
    /// Threshold autoregression: AR signs flip when `Y_{t−1} ≤ r`.
    Setarx,
    /// ARX mean with ARCH(1) errors.
    ArxArch,
}

impl DgpModel {
    pub fn name(&self) -> &'static str {
        match self {
            DgpModel::Arx => "arx",
            DgpModel::Setarx => "setarx",
            DgpModel::ArxArch => "arxarch",
        }
    }
}

impl std::str::FromStr for DgpModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "arx" => Ok(DgpModel::Arx),
            "2" | "setarx" => Ok(DgpModel::Setarx),
            "3" | "arxarch" | "arx-arch" | "arx_arch" => Ok(DgpModel::ArxArch),
            other => Err(Error::InvalidParameter(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub model: DgpModel,
    /// Autoregressive magnitude.
    pub beta: f64,
    pub n: usize,
    pub burn_in: usize,
    /// Coefficient on each of `H_{t,1..15}`.
    pub h_coef: f64,
    /// Regime threshold `r` of the threshold model.
    pub threshold: f64,
    /// Multiplier on every innovation; 0 switches all noise off.
    pub noise_scale: f64,
}

impl DgpSpec {
    pub fn new(model: DgpModel, beta: f64, n: usize) -> Self {
        Self {
            model,
            beta,
            n,
            burn_in: 200,
            h_coef: 0.6,
            threshold: 0.5,
            noise_scale: 1.0,
        }
    }

    /// Length of the simulated series, burn-in included.
    pub fn total_len(&self) -> usize {
        self.burn_in + Y_LAGS + self.n
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if !self.beta.is_finite() {
            return Err(Error::InvalidParameter("beta must be finite".into()));
        }
        Ok(())
    }
}

/// Simulated response with the model errors and, for the ARCH model, `σ_t²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSeries {
    pub y: Vec<f64>,
    pub eps: Vec<f64>,
    pub sigma2: Option<Vec<f64>>,
}

/// `n_total × 50` AR(1) panel started at zero, innovations with
/// correlation `0.2^{|k−l|}`.
pub fn gen_exogenous(n_total: usize, noise_scale: f64, rng: &mut RngStream) -> Matrix<f64> {
    let corr = Matrix::from_fn(N_EXOGENOUS, N_EXOGENOUS, |k, l| H_INNOVATION_CORR.powi(k.abs_diff(l) as i32));
    let chol = cholesky(&corr).expect("Toeplitz correlation is positive definite");
    let mut h = Matrix::zeros(n_total, N_EXOGENOUS);
    let mut z = vec![0.0; N_EXOGENOUS];
    for t in 0..n_total {
        for zj in z.iter_mut() {
            *zj = rng.normal();
        }
        for j in 0..N_EXOGENOUS {
            let e: f64 = chol.row(j)[..=j].iter().zip(&z).map(|(l, z)| l * z).sum();
            let prev = if t > 0 { h[(t - 1, j)] } else { 0.0 };
            h[(t, j)] = H_AR * prev + noise_scale * e;
        }
    }
    h
}

/// Runs the response recursion over every row of `h`.
pub fn gen_response(spec: &DgpSpec, h: &Matrix<f64>, rng: &mut RngStream) -> Result<ResponseSeries> {
    spec.validate()?;
    if h.cols() < N_ACTIVE_H {
        return Err(Error::DimensionMismatch {
            expected: N_ACTIVE_H,
            got: h.cols(),
        });
    }
    let len = h.rows();
    let mut y = vec![0.0; len];
    let mut eps = vec![0.0; len];
    let mut sigma2 = (spec.model == DgpModel::ArxArch).then(|| vec![0.0; len]);
    let (a1, a2) = (spec.beta, -0.5 * spec.beta);
    for t in 0..len {
        let y1 = if t >= 1 { y[t - 1] } else { 0.0 };
        let y2 = if t >= 2 { y[t - 2] } else { 0.0 };
        let sign = match spec.model {
            DgpModel::Setarx if !(y1 > spec.threshold) => -1.0,
            _ => 1.0,
        };
        let exo: f64 = h.row(t)[..N_ACTIVE_H].iter().map(|v| spec.h_coef * v).sum();
        let e = spec.noise_scale * rng.normal();
        eps[t] = e;
        let shock = match sigma2.as_mut() {
            Some(s2) => {
                s2[t] = if t == 0 {
                    1.0
                } else {
                    0.1 + 0.9 * s2[t - 1] * eps[t - 1] * eps[t - 1]
                };
                s2[t].sqrt() * e
            }
            None => e,
        };
        y[t] = sign * (a1 * y1 + a2 * y2) + exo + shock;
    }
    Ok(ResponseSeries { y, eps, sigma2 })
}

/// Response and lagged covariates for one simulated sample, with truth sets (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDataset {
    pub y: Vec<f64>,
    pub x: Matrix<f64>,
    pub s0: Vec<usize>,
    pub h0: Vec<usize>,
    pub s_arch: Vec<usize>,
    pub h_arch: Vec<usize>,
}

fn complement(set: &[usize], p: usize) -> Vec<usize> {
    (0..p).filter(|j| !set.contains(j)).collect()
}

/// `S₀`: the two response lags and `H_{t,1..15}`.
pub fn truth_set() -> Vec<usize> {
    (0..2).chain(Y_LAGS..Y_LAGS + N_ACTIVE_H).collect()
}

/// Relevant set once the ARCH variance function is counted: adds `Y_{t−3}`
/// and `H_{t−1,1..15}`.
pub fn arch_truth_set() -> Vec<usize> {
    let lag1 = Y_LAGS + N_EXOGENOUS;
    (0..3)
        .chain(Y_LAGS..Y_LAGS + N_ACTIVE_H)
        .chain(lag1..lag1 + N_ACTIVE_H)
        .collect()
}

/// Row `t` pairs `Y_t` with `(Y_{t−1}, …, Y_{t−20}, h_t, …, h_{t−4})`, for
/// `t = 20, …, len − 1`.
pub fn assemble_covariates(y: &[f64], h: &Matrix<f64>) -> Result<SimDataset> {
    let len = y.len();
    if h.rows() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: h.rows(),
        });
    }
    if h.cols() != N_EXOGENOUS {
        return Err(Error::DimensionMismatch {
            expected: N_EXOGENOUS,
            got: h.cols(),
        });
    }
    if len <= Y_LAGS {
        return Err(Error::InsufficientLength {
            needed: Y_LAGS + 1,
            got: len,
        });
    }
    let rows = len - Y_LAGS;
    let mut x = Matrix::zeros(rows, P);
    for r in 0..rows {
        let t = r + Y_LAGS;
        let row = x.row_mut(r);
        for l in 1..=Y_LAGS {
            row[l - 1] = y[t - l];
        }
        for l in 0..=H_LAGS {
            let off = Y_LAGS + l * N_EXOGENOUS;
            row[off..off + N_EXOGENOUS].copy_from_slice(h.row(t - l));
        }
    }
    let s0 = truth_set();
    let s_arch = arch_truth_set();
    Ok(SimDataset {
        y: y[Y_LAGS..].to_vec(),
        x,
        h0: complement(&s0, P),
        h_arch: complement(&s_arch, P),
        s0,
        s_arch,
    })
}

/// Exogenous panel, response and covariates for `spec`, burn-in dropped.
pub fn simulate(spec: &DgpSpec, rng: &mut RngStream) -> Result<SimDataset> {
    spec.validate()?;
    let h = gen_exogenous(spec.total_len(), spec.noise_scale, rng);
    let resp = gen_response(spec, &h, rng)?;
    let keep: Vec<usize> = (spec.burn_in..spec.total_len()).collect();
    assemble_covariates(&resp.y[spec.burn_in..], &h.select_rows(&keep))
}

/// `(FDP, power)` with `FDP = #(Ŝ∩H₀)/max(#Ŝ,1)` and `power = #(Ŝ∩S₀)/#S₀`.
pub fn fdp_power(selected: &[usize], s0: &[usize], h0: &[usize]) -> (f64, f64) {
    let false_hits = selected.iter().filter(|j| h0.contains(j)).count();
    let true_hits = selected.iter().filter(|j| s0.contains(j)).count();
    let fdp = false_hits as f64 / selected.len().max(1) as f64;
    let power = if s0.is_empty() {
        0.0
    } else {
        true_hits as f64 / s0.len() as f64
    };
    (fdp, power)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
    }

    #[test]
    fn exogenous_moments() {
        let h = gen_exogenous(100_000, 1.0, &mut RngStream::new(1, 0));
        let c0 = h.column(0);
        let c1 = h.column(1);
        let (m0, v0) = mean_var(&c0);
        let (m1, v1) = mean_var(&c1);
        let target = 1.0 / (1.0 - 0.04);
        assert!((v0 / target - 1.0).abs() < 0.03, "{v0}");
        let cov: f64 = c0.iter().zip(&c1).map(|(a, b)| (a - m0) * (b - m1)).sum::<f64>() / c0.len() as f64;
        let corr = cov / (v0 * v1).sqrt();
        assert!((corr - 0.2).abs() < 0.02, "{corr}");
    }

    #[test]
    fn zero_innovations() {
        let h = gen_exogenous(50, 0.0, &mut RngStream::new(1, 0));
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn white_noise_when_switched_off() {
        let mut spec = DgpSpec::new(DgpModel::Arx, 0.0, 10_000);
        spec.h_coef = 0.0;
        let mut rng = RngStream::new(2, 0);
        let h = gen_exogenous(spec.total_len(), 1.0, &mut rng);
        let y = gen_response(&spec, &h, &mut rng).unwrap().y;
        let (m, v) = mean_var(&y);
        let n = y.len() as f64;
        let ac: f64 = y.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (n * v);
        assert!(ac.abs() < 3.0 / n.sqrt(), "{ac}");
    }

    /// Standard error of the mean from 50 batch means.
    fn batch_se(v: &[f64]) -> f64 {
        let size = v.len() / 50;
        let means: Vec<f64> = v.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
        (mean_var(&means).1 / means.len() as f64).sqrt()
    }

    #[test]
    fn arx_mean_near_zero() {
        let d = simulate(&DgpSpec::new(DgpModel::Arx, 0.7, 10_000), &mut RngStream::new(3, 0)).unwrap();
        let (m, _) = mean_var(&d.y);
        assert!(m.abs() < 3.0 * batch_se(&d.y), "{m}");
    }

    #[test]
    fn threshold_model_without_threshold_is_arx() {
        let mut a = DgpSpec::new(DgpModel::Setarx, 0.7, 300);
        a.threshold = f64::NEG_INFINITY;
        let b = DgpSpec::new(DgpModel::Arx, 0.7, 300);
        let da = simulate(&a, &mut RngStream::new(4, 0)).unwrap();
        let db = simulate(&b, &mut RngStream::new(4, 0)).unwrap();
        assert_eq!(da, db);
    }

    #[test]
    fn arch_recursion_holds() {
        let spec = DgpSpec::new(DgpModel::ArxArch, 0.7, 500);
        let mut rng = RngStream::new(5, 0);
        let h = gen_exogenous(spec.total_len(), 1.0, &mut rng);
        let r = gen_response(&spec, &h, &mut rng).unwrap();
        let s2 = r.sigma2.unwrap();
        assert_eq!(s2[0], 1.0);
        for t in 1..s2.len() {
            assert_eq!(s2[t], 0.1 + 0.9 * s2[t - 1] * r.eps[t - 1] * r.eps[t - 1]);
        }
    }

    #[test]
    fn halves_agree() {
        for model in [DgpModel::Arx, DgpModel::Setarx, DgpModel::ArxArch] {
            for beta in [0.3, 0.7] {
                let d = simulate(&DgpSpec::new(model, beta, 10_000), &mut RngStream::new(6, 0)).unwrap();
                let (a, b) = d.y.split_at(d.y.len() / 2);
                let se = (batch_se(a).powi(2) + batch_se(b).powi(2)).sqrt();
                let (ma, mb) = (mean_var(a).0, mean_var(b).0);
                assert!((ma - mb).abs() <= 4.0 * se, "{model:?} {beta}");
            }
        }
    }

    #[test]
    fn covariate_layout() {
        let d = simulate(&DgpSpec::new(DgpModel::Arx, 0.7, 60), &mut RngStream::new(7, 0)).unwrap();
        assert_eq!(d.x.shape(), (60, 270));
        assert_eq!(d.y.len(), 60);
        for r in 1..60 {
            assert_eq!(d.x[(r, 0)], d.y[r - 1]);
        }
        // The next row's lag-1 block equals this row's contemporaneous block.
        for r in 0..59 {
            assert_eq!(d.x[(r + 1, 70)], d.x[(r, 20)]);
        }
        let s0_1based: Vec<usize> = d.s0.iter().map(|j| j + 1).collect();
        assert_eq!(s0_1based, [1, 2].into_iter().chain(21..=35).collect::<Vec<_>>());
        let arch: Vec<usize> = d.s_arch.iter().map(|j| j + 1).collect();
        assert_eq!(arch, [1, 2, 3].into_iter().chain(21..=35).chain(71..=85).collect::<Vec<_>>());
        assert_eq!(d.s0.len() + d.h0.len(), 270);
        assert!(assemble_covariates(&[0.0; 20], &Matrix::zeros(20, 50)).is_err());
    }

    #[test]
    fn column_21_is_contemporaneous_h1() {
        let spec = DgpSpec::new(DgpModel::Arx, 0.3, 40);
        let mut rng = RngStream::new(8, 0);
        let h = gen_exogenous(spec.total_len(), 1.0, &mut rng);
        let y = gen_response(&spec, &h, &mut rng).unwrap().y;
        let d = assemble_covariates(&y, &h).unwrap();
        for r in 0..d.x.rows() {
            assert_eq!(d.x[(r, 20)], h[(r + 20, 0)]);
        }
    }

    #[test]
    fn fdp_power_examples() {
        let s0 = [0, 1, 2];
        let h0: Vec<usize> = (3..200).collect();
        assert_eq!(fdp_power(&[], &s0, &h0), (0.0, 0.0));
        assert_eq!(fdp_power(&s0, &s0, &h0), (0.0, 1.0));
        let (f, p) = fdp_power(&[0, 1, 99], &s0, &h0);
        assert!((f - 1.0 / 3.0).abs() < 1e-15 && (p - 2.0 / 3.0).abs() < 1e-15);
    }
}
