//! Multilevel Monte Carlo estimators for repeatedly nested expectations.
//!
//! The crate covers classical randomized and derandomized multilevel
//! estimators, two quantum estimators run against an emulated
//! mean-estimation oracle, and a benchmark harness that turns error and cost
//! measurements into log-log slopes.
//!
//! Every estimator records its cost on a [`CostLedger`]: classical process
//! steps actually simulated, and quantum queries charged by the emulator.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod classical;
pub mod cost;
pub mod error;
pub mod ledger;
pub mod problem;
pub mod problems;
pub mod qamc;
pub mod quantum;
pub mod rng;
pub mod schedule;

pub use classical::{
    delta_successive, derand_estimate, rmlmc_estimate, rmlmc_single, single_sample_distributions,
    DeltaKind, LevelKind,
};
pub use error::{NestorError, Result};
pub use ledger::CostLedger;
pub use problem::{
    gamma_oracle, ground_truth, oracle_reference, sample_next, EstimateReport, EstimatorMode,
    History, NestedProblem,
};
pub use problems::{problem_by_id, ProblemParams, PROBLEM_IDS};
pub use qamc::{qamc_eps_delta, qamc_rmse, MeanSampler, QamcConfig};
pub use quantum::{direct_quantized_estimate, qmlmc_estimate, DirectQuantParams};
pub use rng::RandomStream;
pub use schedule::{
    per_level_counts, replication_count, solve_rate, truncation_level, LevelDistribution,
    LevelSchedule,
};
