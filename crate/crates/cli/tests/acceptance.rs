//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;
use tski::diagnostics::{
    fdr_bound, gaussian_kl_stats, mixing_bound, sample_gaussian_rows, simulate_kl_samples, KlSamples, MixingBoundParams,
};
use tski::filter::{
    ebh_select, knockoff_filter_run, knockoff_threshold, lcd_statistics, mda_knockoff_statistics, Statistic, Threshold,
    TskiConfig,
};
use tski::forest::ForestConfig;
use tski::fredmd::{apply_tcode, build_rolling, invert_tcode, synthetic_panel, Month, RollingOptions, Tcode};
use tski::knockoffs::{exact_model_from_truth, sample_knockoffs};
use tski::lasso::{LassoConfig, LassoProblem};
use tski::simulate::{fdp_power, monte_carlo, DgpModel, DgpSpec, McConfig, McReport};
use tski::{Matrix, RngStream};

const SEED: u64 = 2024;
const REPS: usize = 200;
const KKT_TOL: f64 = 1e-6;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Sandwich violations and the largest KKT residual over every run.
#[derive(Default)]
struct Ledger {
    reps: usize,
    sandwich_violations: usize,
    max_kkt: f64,
    kkt_checked: usize,
}

impl Ledger {
    fn kkt(&mut self, r: Option<f64>) {
        if let Some(r) = r {
            self.max_kkt = self.max_kkt.max(r);
            self.kkt_checked += 1;
        }
    }

    fn absorb(&mut self, report: &McReport) {
        self.reps += report.outcomes.len();
        self.sandwich_violations += report.sandwich_violations;
        for o in &report.outcomes {
            self.kkt(o.max_kkt_residual);
        }
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn mc(model: DgpModel, n: usize, beta: f64, q: usize, stat: Statistic<f64>, reps: usize, ledger: &mut Ledger) -> McReport {
    let cfg = McConfig::new(DgpSpec::new(model, beta, n), TskiConfig::new(stat, q, 0.2), reps, SEED);
    let started = Instant::now();
    let report = monte_carlo(&cfg, workers()).expect("monte carlo");
    eprintln!(
        "  {} n={n} beta={beta} q={q} {}: fdr {:.3} power {:.3} failed {} ({:.0?})",
        model.name(),
        cfg.tski.statistic.name(),
        report.fdr,
        report.power,
        report.failed,
        started.elapsed()
    );
    ledger.absorb(&report);
    report
}

fn lcd() -> Statistic<f64> {
    Statistic::Lcd(LassoConfig::default())
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn criterion_1(ledger: &mut Ledger) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (q, target) in [(0, 0.188), (1, 0.142), (2, 0.121)] {
        let r = mc(DgpModel::Arx, 500, 0.7, q, lcd(), REPS, ledger);
        ok &= r.failed == 0 && within(r.fdr, target, 0.07) && r.power >= 0.95;
        parts.push(format!("q={q} fdr {:.3} (target {target}±0.07) power {:.3}", r.fdr, r.power));
    }
    Verdict::new(ok, parts.join("; "))
}

fn criterion_2(ledger: &mut Ledger) -> Verdict {
    let r0 = mc(DgpModel::Arx, 200, 0.7, 0, lcd(), REPS, ledger);
    let r1 = mc(DgpModel::Arx, 200, 0.7, 1, lcd(), REPS, ledger);
    let ok = r0.failed == 0 && r1.failed == 0 && r0.fdr > 0.20 && r1.fdr <= 0.23;
    Verdict::new(ok, format!("q=0 fdr {:.3} (> 0.20); q=1 fdr {:.3} (<= 0.23)", r0.fdr, r1.fdr))
}

fn criterion_3(ledger: &mut Ledger) -> Verdict {
    let r = mc(DgpModel::Setarx, 500, 0.3, 0, lcd(), REPS, ledger);
    let ok = r.failed == 0 && within(r.fdr, 0.164, 0.07) && within(r.power, 0.886, 0.12);
    Verdict::new(ok, format!("fdr {:.3} (0.164±0.07) power {:.3} (0.886±0.12)", r.fdr, r.power))
}

fn criterion_4(ledger: &mut Ledger) -> Verdict {
    let r = mc(DgpModel::ArxArch, 500, 0.7, 1, lcd(), REPS, ledger);
    let ok = r.failed == 0 && within(r.fdr, 0.166, 0.08) && r.power >= 0.90;
    Verdict::new(ok, format!("fdr {:.3} (0.166±0.08) power {:.3} (>= 0.90)", r.fdr, r.power))
}

fn swap_column(u: &Matrix<f64>, ut: &Matrix<f64>, j: usize) -> (Matrix<f64>, Matrix<f64>) {
    let (mut a, mut b) = (u.clone(), ut.clone());
    for i in 0..u.rows() {
        a[(i, j)] = ut[(i, j)];
        b[(i, j)] = u[(i, j)];
    }
    (a, b)
}

/// Random regression instance: `(v, U, Ũ, swapped column)`.
fn swap_instance(seed: u64, idx: u64, n: usize, p: usize) -> (Vec<f64>, Matrix<f64>, Matrix<f64>, usize) {
    let mut rng = RngStream::new(seed, idx);
    let u = Matrix::from_fn(n, p, |_, _| rng.normal());
    let ut = Matrix::from_fn(n, p, |_, _| rng.normal());
    let coef: Vec<f64> = (0..p).map(|_| if rng.uniform() < 0.4 { 2.0 * rng.normal() } else { 0.0 }).collect();
    let v = (0..n)
        .map(|i| (0..p).map(|j| coef[j] * u[(i, j)]).sum::<f64>() + rng.normal())
        .collect();
    let j = rng.below(p);
    (v, u, ut, j)
}

fn flips_exactly(w: &[f64], w2: &[f64], j: usize) -> bool {
    w.iter()
        .zip(w2)
        .enumerate()
        .all(|(s, (&a, &b))| if s == j { b == -a } else { b == a })
}

fn criterion_5(ledger: &mut Ledger) -> Verdict {
    let cfg = ForestConfig {
        n_trees: 30,
        ..Default::default()
    };
    let flips = (0..50u64)
        .into_par_iter()
        .filter(|&i| {
            let (v, u, ut, j) = swap_instance(SEED + 5, i, 60, 6);
            let w = mda_knockoff_statistics(&v, &u, &ut, &cfg, &mut RngStream::new(SEED, i)).expect("mda");
            let (u2, ut2) = swap_column(&u, &ut, j);
            let w2 = mda_knockoff_statistics(&v, &u2, &ut2, &cfg, &mut RngStream::new(SEED, i)).expect("mda");
            flips_exactly(&w, &w2, j)
        })
        .count();
    let r = mc(DgpModel::Arx, 500, 0.7, 1, Statistic::Mda(ForestConfig::default()), 50, ledger);
    let ok = flips == 50 && r.failed == 0 && r.fdr <= 0.30;
    Verdict::new(
        ok,
        format!("sign flips {flips}/50; model 1 q=1 fdr {:.3} (<= 0.30) power {:.3}", r.fdr, r.power),
    )
}

fn ar1_sigma(p: usize, rho: f64) -> Matrix<f64> {
    Matrix::from_fn(p, p, |i, j| rho.powi((i as i32 - j as i32).abs()))
}

fn criterion_6(ledger: &mut Ledger) -> Verdict {
    let (n, p, reps) = (300, 100, 500);
    let sigma = ar1_sigma(p, 0.3);
    let mu = vec![0.0; p];
    let model = exact_model_from_truth(&sigma, &mu).expect("exact model");
    let signals: Vec<usize> = (0..10).map(|k| 5 + 10 * k).collect();
    let nulls: Vec<usize> = (0..p).filter(|j| !signals.contains(j)).collect();
    let started = Instant::now();
    let outcomes: Vec<(f64, f64, Option<f64>)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let root = RngStream::new(SEED + 6, r);
            let mut data_rng = root.derive(0);
            let x = sample_gaussian_rows(&sigma, &mu, n, &mut data_rng).expect("rows");
            let y: Vec<f64> = (0..n)
                .map(|i| {
                    let signal: f64 = signals
                        .iter()
                        .enumerate()
                        .map(|(k, &j)| if k % 2 == 0 { 0.4 } else { -0.4 } * x[(i, j)])
                        .sum();
                    signal + data_rng.normal()
                })
                .collect();
            let res = knockoff_filter_run(&y, &x, &model, &lcd(), 0.2, &root.derive(1)).expect("filter");
            let (fdp, power) = fdp_power(&res.selected, &signals, &nulls);
            (fdp, power, res.max_kkt_residual())
        })
        .collect();
    for o in &outcomes {
        ledger.kkt(o.2);
    }
    let fdr = outcomes.iter().map(|o| o.0).sum::<f64>() / reps as f64;
    let power = outcomes.iter().map(|o| o.1).sum::<f64>() / reps as f64;
    eprintln!("  exact knockoffs: fdr {fdr:.3} power {power:.3} ({:.0?})", started.elapsed());
    Verdict::new(fdr <= 0.23, format!("fdr {fdr:.3} (<= 0.23) power {power:.3} over {reps} reps"))
}

fn brute_threshold(w: &[f64], tau1: f64) -> Threshold<f64> {
    let mut best: Option<f64> = None;
    for &c in w {
        let t = c.abs();
        if t == 0.0 {
            continue;
        }
        let neg = w.iter().filter(|&&v| v <= -t).count();
        let pos = w.iter().filter(|&&v| v >= t).count();
        if (1 + neg) as f64 / pos.max(1) as f64 <= tau1 && best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    }
    best.map_or(Threshold::Infinite, Threshold::Finite)
}

fn brute_ebh(e: &[f64], tau: f64) -> (Vec<usize>, usize) {
    let p = e.len();
    let cut = |k: usize| p as f64 / (tau * k as f64);
    let k_hat = (1..=p)
        .filter(|&k| e.iter().filter(|&&v| v >= cut(k)).count() >= k)
        .max()
        .unwrap_or(0);
    if k_hat == 0 {
        return (Vec::new(), 0);
    }
    ((0..p).filter(|&j| e[j] >= cut(k_hat)).collect(), k_hat)
}

fn criterion_7() -> Verdict {
    let mut rng = RngStream::new(SEED + 7, 0);
    let taus = [0.05, 0.1, 0.2, 0.3, 0.5];
    let mut thr_ok = 0;
    let mut finite = 0;
    for _ in 0..1000 {
        let p = 1 + rng.below(20);
        let shift = 3.0 * rng.uniform();
        let w: Vec<f64> = (0..p)
            .map(|_| {
                let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                let base = -rng.uniform().max(1e-300).ln();
                if rng.uniform() < 0.5 {
                    base + shift
                } else {
                    sign * base
                }
            })
            .collect();
        let tau1 = taus[rng.below(taus.len())];
        let got = knockoff_threshold(&w, tau1);
        finite += usize::from(got.is_finite());
        thr_ok += usize::from(got == brute_threshold(&w, tau1));
    }
    let mut ebh_ok = 0;
    let mut nonempty = 0;
    for _ in 0..1000 {
        let p = 1 + rng.below(20);
        let tau = taus[rng.below(taus.len())];
        let e: Vec<f64> = (0..p)
            .map(|_| match rng.below(3) {
                0 => 0.0,
                1 => p as f64 / (tau * (1 + rng.below(p)) as f64),
                _ => 2.0 * p as f64 / tau * rng.uniform(),
            })
            .collect();
        let got = ebh_select(&e, tau);
        nonempty += usize::from(got.1 > 0);
        ebh_ok += usize::from(got == brute_ebh(&e, tau));
    }
    Verdict::new(
        thr_ok == 1000 && ebh_ok == 1000,
        format!("threshold {thr_ok}/1000 ({finite} finite); e-BH {ebh_ok}/1000 ({nonempty} nonempty)"),
    )
}

fn criterion_8() -> Verdict {
    let cfg = LassoConfig::default();
    let flips = (0..100u64)
        .into_par_iter()
        .filter(|&i| {
            let (v, u, ut, j) = swap_instance(SEED + 8, i, 80, 8);
            let w = lcd_statistics(&v, &u, &ut, &cfg, &mut RngStream::new(SEED, i)).expect("lcd");
            let (u2, ut2) = swap_column(&u, &ut, j);
            let w2 = lcd_statistics(&v, &u2, &ut2, &cfg, &mut RngStream::new(SEED, i)).expect("lcd");
            flips_exactly(&w, &w2, j)
        })
        .count();
    Verdict::new(flips == 100, format!("{flips}/100 exact flips"))
}

fn criterion_9(ledger: &Ledger) -> Verdict {
    Verdict::new(
        ledger.sandwich_violations == 0,
        format!("{} violations over {} replications", ledger.sandwich_violations, ledger.reps),
    )
}

fn criterion_10() -> Verdict {
    let p = 6;
    let sigma = ar1_sigma(p, 0.5);
    let mu = vec![0.0; p];
    let model = exact_model_from_truth(&sigma, &mu).expect("exact model");
    let mut rng = RngStream::new(SEED + 10, 0);
    let x = sample_gaussian_rows(&sigma, &mu, 200, &mut rng).expect("rows");
    let xt = sample_knockoffs(&model, &x, &mut rng).expect("knockoffs");
    let kl = gaussian_kl_stats(&sigma, &mu, &model, &x, &xt).expect("kl");
    let kl_zero = kl.iter().all(|&v| v == 0.0);
    let draws = simulate_kl_samples(&sigma, &mu, &model, 200, 1, 20, &RngStream::new(SEED + 10, 1)).expect("draws");
    let zero = KlSamples::new(vec![vec![vec![0.0; p]; 20]; 2]);
    let bound_sim = fdr_bound(&draws, 0.2, 0.0).expect("bound");
    let bound_zero = fdr_bound(&zero, 0.2, 0.0).expect("bound");
    let mix = mixing_bound(&MixingBoundParams {
        c0: 3.0,
        rho: 0.0,
        q: 2,
        n: 500,
    })
    .expect("mixing");
    let ok = kl_zero && (bound_zero - 0.2).abs() <= 1e-4 && (bound_sim - 0.2).abs() <= 1e-4 && mix == 0.0;
    Verdict::new(
        ok,
        format!("kl exactly zero: {kl_zero}; bound {bound_zero:.6} and {bound_sim:.6} (0.2±1e-4); mixing(rho=0) {mix}"),
    )
}

fn criterion_11() -> Verdict {
    let (n, p) = (100_000, 5);
    let mut rng = RngStream::new(SEED + 11, 0);
    let a = Matrix::from_fn(p, p, |_, _| rng.normal());
    let sigma = Matrix::from_fn(p, p, |i, j| {
        (0..p).map(|k| a[(i, k)] * a[(j, k)]).sum::<f64>() / p as f64 + if i == j { 0.5 } else { 0.0 }
    });
    let mu = vec![0.0; p];
    let model = exact_model_from_truth(&sigma, &mu).expect("exact model");
    let x = sample_gaussian_rows(&sigma, &mu, n, &mut rng).expect("rows");
    let xt = sample_knockoffs(&model, &x, &mut rng).expect("knockoffs");
    let target = |i: usize, j: usize| {
        let s = sigma[(i % p, j % p)];
        if (i < p) != (j < p) && i % p == j % p {
            s - model.d[i % p]
        } else {
            s
        }
    };
    let z = |r: usize, c: usize| if c < p { x[(r, c)] } else { xt[(r, c - p)] };
    let means: Vec<f64> = (0..2 * p).map(|c| (0..n).map(|r| z(r, c)).sum::<f64>() / n as f64).collect();
    let mut worst = 0.0f64;
    for i in 0..2 * p {
        for j in i..2 * p {
            let cov = (0..n).map(|r| (z(r, i) - means[i]) * (z(r, j) - means[j])).sum::<f64>() / (n - 1) as f64;
            let g = target(i, j);
            let se = ((target(i, i) * target(j, j) + g * g) / n as f64).sqrt();
            worst = worst.max((cov - g).abs() / se);
        }
    }
    Verdict::new(worst <= 5.0, format!("largest deviation {worst:.2} standard errors (<= 5)"))
}

/// Accelerated projected gradient on `β = u − v`, `u, v ≥ 0`.
fn projected_gradient_lasso(x: &Matrix<f64>, y: &[f64], lambda: f64, iters: usize) -> Vec<f64> {
    let (n, p) = (x.rows(), x.cols());
    let nf = n as f64;
    let frob: f64 = (0..n).flat_map(|i| x.row(i).iter().map(|v| v * v).collect::<Vec<_>>()).sum();
    let step = 1.0 / (4.0 * frob / nf);
    let grad = |z: &[f64]| -> Vec<f64> {
        let beta: Vec<f64> = (0..p).map(|j| z[j] - z[j + p]).collect();
        let r: Vec<f64> = (0..n).map(|i| y[i] - x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).collect();
        let g: Vec<f64> = (0..p).map(|j| -2.0 / nf * (0..n).map(|i| x[(i, j)] * r[i]).sum::<f64>()).collect();
        (0..2 * p).map(|k| if k < p { g[k] + lambda } else { -g[k - p] + lambda }).collect()
    };
    let mut z = vec![0.0; 2 * p];
    let mut look = z.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let g = grad(&look);
        let next: Vec<f64> = look.iter().zip(&g).map(|(a, b)| (a - step * b).max(0.0)).collect();
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        look = next.iter().zip(&z).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
        z = next;
        t = t_next;
    }
    (0..p).map(|j| z[j] - z[j + p]).collect()
}

fn lasso_objective(x: &Matrix<f64>, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = x.rows();
    let rss: f64 = (0..n)
        .map(|i| {
            let r = y[i] - x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
            r * r
        })
        .sum();
    rss / n as f64 + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Objective gaps against the oracle; KKT residuals go to the ledger.
fn lasso_oracle_gaps(ledger: &mut Ledger) -> f64 {
    let results: Vec<(f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = RngStream::new(SEED + 12, k);
            let x = Matrix::from_fn(20, 10, |_, _| rng.normal());
            let coef: Vec<f64> = (0..10).map(|_| if rng.uniform() < 0.5 { rng.normal() } else { 0.0 }).collect();
            let y: Vec<f64> = (0..20)
                .map(|i| x.row(i).iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>() + 0.5 * rng.normal())
                .collect();
            let problem = LassoProblem::new(&x, &y).expect("problem");
            let lambda = problem.lambda_max() * (0.02 + 0.6 * rng.uniform());
            let fit = problem.solve(lambda, &LassoConfig::fixed(lambda)).expect("solve");
            let oracle = projected_gradient_lasso(&x, &y, lambda, 50_000);
            let gap = (lasso_objective(&x, &y, &fit.beta, lambda) - lasso_objective(&x, &y, &oracle, lambda)).abs();
            (gap, fit.kkt_residual)
        })
        .collect();
    for r in &results {
        ledger.kkt(Some(r.1));
    }
    results.iter().map(|r| r.0).fold(0.0, f64::max)
}

fn criterion_12(worst_gap: f64, ledger: &Ledger) -> Verdict {
    let ok = worst_gap <= 1e-4 && ledger.max_kkt <= KKT_TOL;
    Verdict::new(
        ok,
        format!(
            "largest objective gap {worst_gap:.2e} (<= 1e-4); largest KKT residual {:.2e} over {} fits (<= 1e-6)",
            ledger.max_kkt, ledger.kkt_checked
        ),
    )
}

fn criterion_13() -> Verdict {
    let panel = synthetic_panel(118, 127, Month::new(2013, 5), SEED);
    let design = build_rolling(&panel, &RollingOptions::default()).expect("rolling design");
    let windows = design.windows.len();
    let cols = design.columns.len();
    let widths_ok = design.windows.iter().all(|w| w.x.cols() == 254);
    let mut rng = RngStream::new(SEED + 13, 0);
    let mut worst = 0.0f64;
    for code in 1..=7u8 {
        let tcode = Tcode::from_code(code).expect("tcode");
        for _ in 0..20 {
            let mut level = 50.0 + 50.0 * rng.uniform();
            let x: Vec<Option<f64>> = (0..120)
                .map(|_| {
                    level *= 1.0 + 0.01 * rng.normal();
                    Some(level)
                })
                .collect();
            let z: Vec<f64> = apply_tcode(&x, tcode)
                .expect("transform")
                .into_iter()
                .map(|v| v.unwrap_or(f64::NAN))
                .collect();
            let initial: Vec<f64> = x[..tcode.lost()].iter().map(|v| v.unwrap()).collect();
            let back = invert_tcode(&z, tcode, &initial).expect("invert");
            for (a, b) in x.iter().zip(&back) {
                let a = a.unwrap();
                worst = worst.max((a - b).abs() / a.abs().max(1.0));
            }
        }
    }
    let ok = windows == 58 && cols == 254 && widths_ok && worst <= 1e-10;
    Verdict::new(
        ok,
        format!("{windows} windows (58), {cols} columns (254); tcode round trip error {worst:.1e} (<= 1e-10)"),
    )
}

fn cli_outputs(args: &[&str], threads: &str, out: &Path, is_dir: bool) -> Vec<(String, Vec<u8>)> {
    let mut full: Vec<&str> = args.to_vec();
    let out_s = out.to_str().unwrap().to_string();
    full.extend(["--threads", threads, "--output", &out_s]);
    let res = common::run(&full);
    assert!(res.status.success(), "{full:?}: {}", String::from_utf8_lossy(&res.stderr));
    if is_dir {
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    } else {
        vec![(String::new(), fs::read(out).unwrap())]
    }
}

fn criterion_14() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let d = dir.path();
    common::write_dataset(&d.join("data.csv"), &common::model1_data(150, SEED));
    common::write_ar1_sigma(&d.join("sigma.csv"), 8, 0.5);
    fs::write(d.join("panel.csv"), synthetic_panel(75, 6, Month::new(2015, 1), SEED).to_csv()).unwrap();
    let data = d.join("data.csv").to_str().unwrap().to_string();
    let sigma = d.join("sigma.csv").to_str().unwrap().to_string();
    let panel = d.join("panel.csv").to_str().unwrap().to_string();
    let cases: Vec<(&str, Vec<&str>, bool)> = vec![
        ("simulate", vec!["simulate", "--model", "arx", "--n", "150", "--beta", "0.7", "--q", "1", "--reps", "4"], false),
        ("simulate-json", vec!["simulate", "--model", "setarx", "--n", "120", "--beta", "0.3", "--reps", "3", "--format", "json"], false),
        ("select", vec!["select", "--data", &data, "--response", "y", "--q", "1"], false),
        ("select-mda", vec!["select", "--data", &data, "--response", "y", "--stat", "mda", "--format", "csv"], false),
        ("knockoffs", vec!["knockoffs", "--data", &data], false),
        ("diagnose", vec!["diagnose", "--sigma", &sigma, "--n", "100", "--q", "1", "--draws", "20", "--c0", "1", "--rho", "0.5"], false),
        ("diagnose-data", vec!["diagnose", "--data", &data, "--q", "1", "--draws", "5", "--c0", "1", "--rho", "0.5"], false),
        ("fredmd", vec!["fredmd", "--panel", &panel, "--repeats", "3", "--q", "1"], true),
    ];
    let mut mismatched = Vec::new();
    for (name, args, is_dir) in &cases {
        let mut args = args.clone();
        args.extend(["--seed", "17"]);
        let a = cli_outputs(&args, "1", &d.join(format!("{name}-1")), *is_dir);
        let b = cli_outputs(&args, "8", &d.join(format!("{name}-8")), *is_dir);
        let again = cli_outputs(&args, "1", &d.join(format!("{name}-1b")), *is_dir);
        if a != b || a != again || a.iter().any(|(_, bytes)| bytes.is_empty()) {
            mismatched.push(*name);
        }
    }
    Verdict::new(
        mismatched.is_empty(),
        format!("{} subcommand runs compared, mismatches: {mismatched:?}", cases.len()),
    )
}

fn main() -> ExitCode {
    let mut ledger = Ledger::default();
    let mut verdicts: Vec<(usize, &str, Verdict)> = Vec::new();
    {
        let mut record = |id: usize, name: &'static str, f: &mut dyn FnMut(&mut Ledger) -> Verdict| {
            let started = Instant::now();
            eprintln!("criterion {id}: {name}");
            let v = f(&mut ledger);
            eprintln!("  {} in {:.0?}", if v.pass { "pass" } else { "FAIL" }, started.elapsed());
            verdicts.push((id, name, v));
        };
        record(7, "threshold and e-bh oracles", &mut |_| criterion_7());
        record(8, "lcd sign flip", &mut |_| criterion_8());
        record(10, "diagnostics", &mut |_| criterion_10());
        record(11, "knockoff moment matching", &mut |_| criterion_11());
        record(13, "fred-md pipeline", &mut |_| criterion_13());
        record(14, "cli determinism", &mut |_| criterion_14());
        record(1, "model 1 n=500 fdr and power", &mut criterion_1);
        record(2, "model 1 n=200 small-sample inflation", &mut criterion_2);
        record(3, "model 2 setarx fdr and power", &mut criterion_3);
        record(4, "model 3 arch fdr and power", &mut criterion_4);
        record(5, "mda sign flip and fdr", &mut criterion_5);
        record(6, "exact knockoff fdr control", &mut criterion_6);
    }
    let gap = lasso_oracle_gaps(&mut ledger);
    verdicts.push((9, "sandwich invariant", criterion_9(&ledger)));
    verdicts.push((12, "lasso oracle and kkt", criterion_12(gap, &ledger)));
    verdicts.sort_by_key(|v| v.0);

    println!();
    let mut failures = 0;
    for (id, name, v) in &verdicts {
        failures += usize::from(!v.pass);
        println!("criterion {id:>2} {}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("{} of {} criteria passed", verdicts.len() - failures, verdicts.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
