//! Synthetic data with known treatment effects and a replication driver that
//! measures bias, RMSE, coverage and test rejection rates.

mod dgp;
mod runner;

pub use dgp::{simulate_dgp, DgpConfig, ExternalInstrument, SimulatedSample, CLAMP, CLAMP_WARN_SHARE};
pub use runner::{
    fit_sample, replication_seed, run_mc, run_mc_with, run_replication, run_replications,
    summarize, EstimateRecord, EstimatorKind, EstimatorSummary, McOptions, McSummary,
    ReplicationResult, MAX_FAILURE_SHARE, TREATMENT,
};
