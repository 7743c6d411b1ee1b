//! Repeatedly nested expectation problems.
//!
//! A problem of horizon `D` has stage functions `g_0, …, g_D` and a
//! conditional sampler for the process `y_0, y_1, …, y_D`. The target is
//!
//! ```text
//! γ_D(y_{<D}) = E[g_D(y_{≤D}) | y_{<D}]
//! γ_d(y_{<d}) = E[g_d(y_{≤d}, γ_{d+1}(y_{≤d})) | y_{<d}]
//! ```
//!
//! and each `g_d` must be `L_d`-Lipschitz in its last argument.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{NestorError, Result};
use crate::ledger::CostLedger;
use crate::rng::RandomStream;

/// The observed prefix `y_{<d}` of one trajectory. Its stage is its length.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    values: Vec<f64>,
}

impl History {
    pub fn new() -> Self {
        History { values: Vec::new() }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        History { values }
    }

    pub fn with_capacity(horizon: usize) -> Self {
        History {
            values: Vec::with_capacity(horizon + 1),
        }
    }

    #[inline]
    pub fn stage(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn push(&mut self, y: f64) {
        self.values.push(y);
    }

    #[inline]
    pub fn pop(&mut self) -> Option<f64> {
        self.values.pop()
    }
}

/// Interface every nested problem implements. Implementations are immutable
/// and shared across worker threads.
pub trait NestedProblem: Send + Sync {
    fn id(&self) -> &str;

    /// Number of nestings `D`; stages run `0..=D`.
    fn horizon(&self) -> usize;

    /// Lipschitz constant of `g_d` in its last argument (at least 1).
    fn lipschitz(&self, d: usize) -> f64;

    /// Draws `y_d` given `prefix = y_{<d}`.
    fn draw(&self, prefix: &[f64], rng: &mut RandomStream) -> f64;

    /// `g_d(y_{≤d}, z)` where `d = path.len() - 1 < D`.
    fn stage_value(&self, path: &[f64], z: f64) -> f64;

    /// `g_D(y_{≤D})`.
    fn terminal_value(&self, path: &[f64]) -> f64;

    /// A bound `s` on the root second moment of `g_D`, used when the
    /// terminal stage is handed to the mean-estimation oracle.
    fn terminal_bound(&self) -> f64;

    /// Exact `γ_d(prefix)` with `d = prefix.len()`, when known.
    fn truth(&self, _prefix: &[f64]) -> Option<f64> {
        None
    }
}

impl fmt::Debug for dyn NestedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NestedProblem")
            .field("id", &self.id())
            .field("horizon", &self.horizon())
            .finish()
    }
}

/// Simulates one process step, charging one classical step to `ledger`.
#[inline]
pub fn sample_next(
    problem: &dyn NestedProblem,
    history: &History,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<f64> {
    let stage = history.stage();
    if stage > problem.horizon() {
        return Err(NestorError::InvalidStage {
            stage,
            horizon: problem.horizon(),
        });
    }
    ledger.add_steps(1);
    Ok(problem.draw(history.values(), rng))
}

/// Brute-force nested plug-in estimate of `γ_d(history)` using `fanout`
/// samples at every remaining stage. Biased for finite fanout, consistent as
/// it grows; costs `fanout^(D - d + 1)` draws.
pub fn gamma_oracle(
    problem: &dyn NestedProblem,
    history: &History,
    fanout: usize,
    rng: &mut RandomStream,
) -> Result<f64> {
    if fanout == 0 {
        return Err(NestorError::parameter("fanout", "must be at least 1"));
    }
    if history.stage() > problem.horizon() {
        return Err(NestorError::InvalidStage {
            stage: history.stage(),
            horizon: problem.horizon(),
        });
    }
    let mut path = history.values().to_vec();
    path.reserve(problem.horizon() + 1 - path.len());
    Ok(oracle_rec(problem, &mut path, fanout, rng))
}

fn oracle_rec(
    problem: &dyn NestedProblem,
    path: &mut Vec<f64>,
    fanout: usize,
    rng: &mut RandomStream,
) -> f64 {
    let d = path.len();
    let mut mean = 0.0;
    for k in 0..fanout {
        let y = problem.draw(path, rng);
        path.push(y);
        let v = if d == problem.horizon() {
            problem.terminal_value(path)
        } else {
            let inner = oracle_rec(problem, path, fanout, rng);
            problem.stage_value(path, inner)
        };
        path.pop();
        mean += (v - mean) / (k + 1) as f64;
    }
    mean
}

/// Ground truth accepted only once doubling the fanout moves the oracle by
/// less than `tolerance / 5`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReference {
    pub value: f64,
    pub fanout: usize,
    pub change: f64,
}

pub fn oracle_reference(
    problem: &dyn NestedProblem,
    history: &History,
    start_fanout: usize,
    max_fanout: usize,
    tolerance: f64,
    rng: &mut RandomStream,
) -> Result<OracleReference> {
    if !(tolerance > 0.0) {
        return Err(NestorError::parameter("tolerance", "must be positive"));
    }
    let limit = tolerance / 5.0;
    let mut fanout = start_fanout.max(1);
    let mut previous = gamma_oracle(problem, history, fanout, rng)?;
    loop {
        let doubled = fanout * 2;
        let next = gamma_oracle(problem, history, doubled, rng)?;
        let change = (next - previous).abs();
        if change < limit {
            return Ok(OracleReference {
                value: next,
                fanout: doubled,
                change,
            });
        }
        if doubled * 2 > max_fanout {
            return Err(NestorError::OracleUnstable {
                fanout: doubled,
                change,
                limit,
            });
        }
        fanout = doubled;
        previous = next;
    }
}

/// Reference value for `γ_d(history)`: the analytic truth when the problem
/// provides one, else a fanout-gated oracle estimate.
pub fn ground_truth(
    problem: &dyn NestedProblem,
    history: &History,
    tolerance: f64,
    rng: &mut RandomStream,
) -> Result<f64> {
    match problem.truth(history.values()) {
        Some(v) => Ok(v),
        None => Ok(oracle_reference(problem, history, 16, 1 << 16, tolerance, rng)?.value),
    }
}

/// Probes `|g_d(y, z) - g_d(y, z')| / |z - z'|` on simulated histories and
/// random `z, z'`. Returns the largest observed ratio divided by `L_d` over
/// all stages; a value above 1 falsifies the declared constants.
pub fn lipschitz_spot_check(
    problem: &dyn NestedProblem,
    probes: usize,
    rng: &mut RandomStream,
) -> f64 {
    let horizon = problem.horizon();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let mut path = Vec::with_capacity(horizon + 1);
        for d in 0..horizon {
            let y = problem.draw(&path, rng);
            path.push(y);
            let z = 3.0 * rng.standard_normal();
            let w = z + 3.0 * rng.standard_normal();
            if z == w {
                continue;
            }
            let ratio = (problem.stage_value(&path, z) - problem.stage_value(&path, w)).abs()
                / (z - w).abs();
            worst = worst.max(ratio / problem.lipschitz(d));
        }
    }
    worst
}

/// Which estimator produced a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorMode {
    #[serde(rename = "alg1")]
    Single,
    #[serde(rename = "alg2-geo")]
    BatchedGeometric,
    #[serde(rename = "alg2-trunc")]
    BatchedTruncated,
    #[serde(rename = "alg3")]
    Derandomized,
    #[serde(rename = "alg4")]
    DirectQuantized,
    #[serde(rename = "alg6")]
    QuantumMlmc,
}

impl EstimatorMode {
    pub const ALL: [EstimatorMode; 6] = [
        EstimatorMode::Single,
        EstimatorMode::BatchedGeometric,
        EstimatorMode::BatchedTruncated,
        EstimatorMode::Derandomized,
        EstimatorMode::DirectQuantized,
        EstimatorMode::QuantumMlmc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorMode::Single => "alg1",
            EstimatorMode::BatchedGeometric => "alg2-geo",
            EstimatorMode::BatchedTruncated => "alg2-trunc",
            EstimatorMode::Derandomized => "alg3",
            EstimatorMode::DirectQuantized => "alg4",
            EstimatorMode::QuantumMlmc => "alg6",
        }
    }

    pub fn is_quantum(self) -> bool {
        matches!(
            self,
            EstimatorMode::DirectQuantized | EstimatorMode::QuantumMlmc
        )
    }

    pub fn known() -> String {
        Self::ALL
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorMode {
    type Err = NestorError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| NestorError::UnknownEstimator {
                id: s.to_string(),
                known: Self::known(),
            })
    }
}

/// One realized estimate together with what it cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub target_error: f64,
    pub stage: usize,
    pub ledger: CostLedger,
    pub seed: u64,
    pub replication: u64,
    pub mode: EstimatorMode,
}
