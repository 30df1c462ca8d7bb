use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use tski::diagnostics::{sample_gaussian_rows, simulate_kl_samples, surrogate_kl_samples, DiagnosticReport, MixingBoundParams};
use tski::filter::{tski_run, Statistic, TskiConfig};
use tski::forest::ForestConfig;
use tski::fredmd::{build_rolling, parse_panel, rolling_inference, rolling_metadata, RollingOptions, RollingParams};
use tski::knockoffs::{exact_model_from_truth, fit_knockoff_model, sample_knockoffs, FittedGaussianSampler, Gamma, ShrinkageConfig};
use tski::lasso::LassoConfig;
use tski::simulate::{monte_carlo, DgpModel, DgpSpec, McConfig, CSV_HEADER};
use tski::{Matrix, RngStream};

use crate::io::{fmt_float, matrix_csv, read_square, read_table, write_output};
use crate::{CliError, FilterArgs, Format, ShrinkageArgs, StatKind};

fn shrinkage_config(args: &ShrinkageArgs) -> Result<ShrinkageConfig, CliError> {
    let gamma = match args.gamma {
        Some(g) if !(0.0..=1.0).contains(&g) => {
            return Err(CliError::Config(format!("--gamma {g} outside [0, 1]")));
        }
        Some(g) => Gamma::Fixed(g),
        None => Gamma::Auto,
    };
    if !(args.eigen_floor >= 0.0 && args.eigen_floor <= 1.0) {
        return Err(CliError::Config(format!("--eigen-floor {} outside [0, 1]", args.eigen_floor)));
    }
    Ok(ShrinkageConfig {
        gamma,
        eigen_floor: args.eigen_floor,
    })
}

fn tski_config(args: &FilterArgs) -> Result<TskiConfig<f64>, CliError> {
    let statistic = match args.stat {
        StatKind::Lcd => Statistic::Lcd(LassoConfig::default()),
        StatKind::Mda => Statistic::Mda(ForestConfig::default()),
    };
    let mut cfg = TskiConfig::new(statistic, args.q, args.tau_fdr);
    cfg.tau1 = args.tau1;
    cfg.validate()?;
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    model: &str,
    n: usize,
    beta: f64,
    reps: usize,
    filter: &FilterArgs,
    seed: u64,
    workers: usize,
    format: Option<Format>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let model: DgpModel = model
        .parse()
        .map_err(|_| CliError::Config(format!("unknown model {model:?}")))?;
    if reps == 0 {
        return Err(CliError::Config("--reps must be at least 1".into()));
    }
    if !beta.is_finite() {
        return Err(CliError::Config("--beta must be finite".into()));
    }
    if n < filter.q + 1 {
        return Err(tski::Error::TooFewObservations { n, needed: filter.q + 1 }.into());
    }
    let mut cfg = McConfig::new(DgpSpec::new(model, beta, n), tski_config(filter)?, reps, seed);
    cfg.shrinkage = shrinkage_config(&filter.shrinkage)?;
    let report = monte_carlo(&cfg, workers)?;
    let text = match format.unwrap_or(Format::Csv) {
        Format::Csv => format!("{CSV_HEADER}\n{}\n", report.csv_row()),
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    };
    write_output(out, &text)
}

pub fn select(
    data: &Path,
    response: &str,
    filter: &FilterArgs,
    seed: u64,
    format: Option<Format>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let table = read_table(data)?;
    let r = table
        .names
        .iter()
        .position(|n| n == response)
        .ok_or_else(|| CliError::Config(format!("response column {response:?} not found")))?;
    if table.names.len() < 2 {
        return Err(CliError::Config("no covariate columns".into()));
    }
    let y = table.data.column(r);
    let keep: Vec<usize> = (0..table.names.len()).filter(|&j| j != r).collect();
    let names: Vec<String> = keep.iter().map(|&j| table.names[j].clone()).collect();
    let x = Matrix::from_fn(table.data.rows(), keep.len(), |i, j| table.data[(i, keep[j])]);
    let cfg = tski_config(filter)?;
    let sampler = FittedGaussianSampler {
        shrinkage: shrinkage_config(&filter.shrinkage)?,
    };
    let res = tski_run(&y, &x, &sampler, &cfg, &RngStream::new(seed, 0))?;
    let text = match format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = res.to_json();
            v["covariates"] = json!(names);
            v["selected_names"] = json!(res.selected.iter().map(|&j| names[j].clone()).collect::<Vec<_>>());
            serde_json::to_string_pretty(&v).expect("json serializes") + "\n"
        }
        Format::Csv => {
            let mut s = String::from("covariate,evalue,selected\n");
            for (j, name) in names.iter().enumerate() {
                s.push_str(&format!("{},{},{}\n", name, fmt_float(res.evalues[j]), u8::from(res.selected.contains(&j))));
            }
            s
        }
    };
    write_output(out, &text)
}

pub fn knockoffs(data: &Path, zero_d: bool, shrinkage: &ShrinkageArgs, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let table = read_table(data)?;
    let mut model = fit_knockoff_model(&table.data, &shrinkage_config(shrinkage)?)?;
    if zero_d {
        model = model.with_zero_d();
    }
    let xt = sample_knockoffs(&model, &table.data, &mut RngStream::new(seed, 0))?;
    let names: Vec<String> = table.names.iter().map(|n| format!("~{n}")).collect();
    write_output(out, &matrix_csv(&names, &xt))
}

pub struct DiagnoseArgs {
    pub sigma: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub n: usize,
    pub q: usize,
    pub draws: usize,
    pub exact: bool,
    pub c0: f64,
    pub rho: f64,
    pub tau_fdr: f64,
    pub shrinkage: ShrinkageArgs,
}

/// Simulation mode draws the fitting sample from stream `(seed, 1)` and the
/// KL draws from `(seed, 2)`; surrogate mode uses `(seed, 2)` for the draws.
pub fn diagnose(args: DiagnoseArgs, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    if !(args.tau_fdr > 0.0 && args.tau_fdr < 1.0) {
        return Err(CliError::Config(format!("--tau-fdr {} outside (0, 1)", args.tau_fdr)));
    }
    let shrinkage = shrinkage_config(&args.shrinkage)?;
    let kl_rng = RngStream::new(seed, 2);
    let (label, kl, n) = match (&args.sigma, &args.data) {
        (Some(path), _) => {
            let sigma = read_square(path)?;
            let mu = vec![0.0; sigma.rows()];
            let model = if args.exact {
                exact_model_from_truth(&sigma, &mu)?
            } else {
                let sample = sample_gaussian_rows(&sigma, &mu, args.n, &mut RngStream::new(seed, 1))?;
                fit_knockoff_model(&sample, &shrinkage)?
            };
            let kl = simulate_kl_samples(&sigma, &mu, &model, args.n, args.q, args.draws, &kl_rng)?;
            ("simulation", kl, args.n)
        }
        (None, Some(path)) => {
            let table = read_table(path)?;
            let model = fit_knockoff_model(&table.data, &shrinkage)?;
            let kl = surrogate_kl_samples(&table.data, &model, args.q, args.draws, &kl_rng)?;
            ("surrogate", kl, table.data.rows())
        }
        (None, None) => return Err(CliError::Config("one of --sigma or --data is required".into())),
    };
    let mixing = MixingBoundParams {
        c0: args.c0,
        rho: args.rho,
        q: args.q,
        n,
    };
    let report = DiagnosticReport::build(label, &kl, args.tau_fdr, mixing)?;
    write_output(out, &(report.to_json() + "\n"))
}

pub fn fredmd(
    panel: &Path,
    window: usize,
    repeats: usize,
    cpi_series: String,
    filter: &FilterArgs,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let dir = out.ok_or_else(|| CliError::Config("fredmd writes several files; pass --output DIR".into()))?;
    let bytes = fs::read(panel).map_err(|e| CliError::Config(format!("cannot read {}: {e}", panel.display())))?;
    let panel = parse_panel(&bytes)?;
    let options = RollingOptions {
        window_months: window,
        cpi_series,
        ..RollingOptions::default()
    };
    let design = build_rolling(&panel, &options)?;
    let params = RollingParams {
        tski: tski_config(filter)?,
        shrinkage: shrinkage_config(&filter.shrinkage)?,
        repeats,
        seed,
    };
    let report = rolling_inference(&design, &params)?;
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    write_output(Some(&dir.join("windows.csv")), &report.windows_csv())?;
    write_output(Some(&dir.join("covariates.csv")), &report.covariates_csv())?;
    let meta = serde_json::to_string_pretty(&rolling_metadata(&design, &params)).expect("json serializes") + "\n";
    write_output(Some(&dir.join("metadata.json")), &meta)
}
