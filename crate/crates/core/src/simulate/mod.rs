//! Simulation models, covariate assembly, selection metrics and the Monte
//! Carlo harness.

mod dgp;
mod monte_carlo;

pub use dgp::{
    arch_truth_set, assemble_covariates, fdp_power, gen_exogenous, gen_response, simulate, truth_set, DgpModel,
    DgpSpec, ResponseSeries, SimDataset, N_EXOGENOUS, P, Y_LAGS,
};
pub use monte_carlo::{monte_carlo, run_replication, McConfig, McReport, RepOutcome, CSV_HEADER};
