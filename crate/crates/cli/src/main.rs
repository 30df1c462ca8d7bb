use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod io;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or input data; exit code 2.
    Config(String),
    /// Failure while computing or writing; exit code 1.
    Runtime(String),
}

impl From<tski::Error> for CliError {
    fn from(e: tski::Error) -> Self {
        use tski::Error::*;
        match e {
            NotPositiveDefinite { .. } | ShrinkageFailed { .. } | Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "tski", version, about = "Time-series knockoff inference")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "TSKI_THREADS")]
    threads: Option<usize>,
    /// Output file (a directory for `fredmd`); stdout when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StatKind {
    Lcd,
    Mda,
}

#[derive(Args, Debug, Clone)]
struct FilterArgs {
    /// Number of skipped lags; the series is split into q + 1 subsamples.
    #[arg(long, default_value_t = 0)]
    q: usize,
    #[arg(long, value_enum, default_value_t = StatKind::Lcd)]
    stat: StatKind,
    /// Target FDR level τ*.
    #[arg(long, default_value_t = 0.2)]
    tau_fdr: f64,
    /// Per-subsample level; defaults to τ*/(q+1).
    #[arg(long)]
    tau1: Option<f64>,
    #[command(flatten)]
    shrinkage: ShrinkageArgs,
}

#[derive(Args, Debug, Clone)]
struct ShrinkageArgs {
    /// Fixed shrinkage intensity in [0, 1]; automatic when omitted.
    #[arg(long)]
    gamma: Option<f64>,
    /// Smallest admissible correlation eigenvalue for automatic shrinkage.
    #[arg(long, default_value_t = tski::knockoffs::CONDITIONED_EIGEN_FLOOR)]
    eigen_floor: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo study of one simulation configuration.
    Simulate {
        /// arx, setarx or arxarch (or 1, 2, 3).
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[command(flatten)]
        filter: FilterArgs,
    },
    /// Variable selection on a CSV data set.
    Select {
        #[arg(long)]
        data: PathBuf,
        /// Name of the response column.
        #[arg(long)]
        response: String,
        #[command(flatten)]
        filter: FilterArgs,
    },
    /// Gaussian knockoff copy of every column of a CSV data set.
    Knockoffs {
        #[arg(long)]
        data: PathBuf,
        /// Use D = 0, which reproduces the input.
        #[arg(long)]
        zero_d: bool,
        #[command(flatten)]
        shrinkage: ShrinkageArgs,
    },
    /// FDR bound report from KL statistics and the mixing term.
    Diagnose {
        /// True covariance (headerless square CSV); simulation mode.
        #[arg(long, conflicts_with = "data", required_unless_present = "data")]
        sigma: Option<PathBuf>,
        /// Data CSV with header; plug-in surrogate mode.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Rows per simulated sample (simulation mode).
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        q: usize,
        #[arg(long, default_value_t = 100)]
        draws: usize,
        /// Use the knockoff model built from the true covariance.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        c0: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 0.2)]
        tau_fdr: f64,
        #[command(flatten)]
        shrinkage: ShrinkageArgs,
    },
    /// Rolling-window inflation study on a FRED-MD panel.
    Fredmd {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long, default_value_t = 60)]
        window: usize,
        #[arg(long, default_value_t = 100)]
        repeats: usize,
        #[arg(long, default_value = tski::fredmd::DEFAULT_CPI_SERIES)]
        cpi_series: String,
        #[command(flatten)]
        filter: FilterArgs,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads.unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let workers = rayon::current_num_threads();
    let out = cli.output.as_deref();
    match cli.command {
        Command::Simulate {
            model,
            n,
            beta,
            reps,
            filter,
        } => commands::simulate(&model, n, beta, reps, &filter, cli.seed, workers, cli.format, out),
        Command::Select { data, response, filter } => commands::select(&data, &response, &filter, cli.seed, cli.format, out),
        Command::Knockoffs { data, zero_d, shrinkage } => commands::knockoffs(&data, zero_d, &shrinkage, cli.seed, out),
        Command::Diagnose {
            sigma,
            data,
            n,
            q,
            draws,
            exact,
            c0,
            rho,
            tau_fdr,
            shrinkage,
        } => commands::diagnose(
            commands::DiagnoseArgs {
                sigma,
                data,
                n,
                q,
                draws,
                exact,
                c0,
                rho,
                tau_fdr,
                shrinkage,
            },
            cli.seed,
            out,
        ),
        Command::Fredmd {
            panel,
            window,
            repeats,
            cpi_series,
            filter,
        } => commands::fredmd(&panel, window, repeats, cpi_series, &filter, cli.seed, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
