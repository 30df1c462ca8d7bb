//! Knockoff thresholds, e-values, e-BH and the subsampled inference procedure.

mod evalues;
mod run;
mod statistics;

pub use evalues::{
    aggregate_evalues, ebh_select, evalues_single, knockoff_threshold, subsample_indices, KnockoffStats, Threshold,
};
pub use run::{knockoff_filter_run, tski_run, RunParams, SelectionResult, SubsampleResult, TskiConfig};
pub use statistics::{lcd_statistics, mda_knockoff_statistics, StatOutput, Statistic};
