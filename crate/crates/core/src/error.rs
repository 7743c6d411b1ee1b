use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by problem evaluation, schedules, estimators and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum NestorError {
    #[error("stage {stage} is past the horizon {horizon}")]
    InvalidStage { stage: usize, horizon: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("schedule infeasible at level {level}: floor(M * P(n)) = 0 (M = {replications}, P(n) = {mass:e})")]
    ScheduleInfeasible {
        level: usize,
        replications: u64,
        mass: f64,
    },

    #[error("need at least {needed} rows to fit a slope, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("unknown problem `{id}`; registered problems: {known}")]
    UnknownProblem { id: String, known: String },

    #[error("unknown estimator `{id}`; available estimators: {known}")]
    UnknownEstimator { id: String, known: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error(
        "estimated {estimated:.3e} classical steps per estimate at eps = {eps} exceeds the \
         desk-scale limit of {limit:.0e}; pass the override flag to run anyway"
    )]
    Guardrail {
        eps: f64,
        estimated: f64,
        limit: f64,
    },

    #[error("ground-truth oracle did not stabilise: fanout {fanout} moved the reference by {change:e} (limit {limit:e})")]
    OracleUnstable {
        fanout: usize,
        change: f64,
        limit: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("plot error: {0}")]
    Plot(String),
}

impl NestorError {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        NestorError::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the caller's request rather than a failure
    /// while running it.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            NestorError::UnknownProblem { .. }
                | NestorError::UnknownEstimator { .. }
                | NestorError::UnknownColumn(_)
                | NestorError::Config(_)
                | NestorError::Parameter { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, NestorError>;
