//! Classical estimators: the single-sample randomized estimator with
//! antithetic differences, the batched randomized estimator with geometric or
//! truncated levels, and the derandomized multilevel estimator.

use serde::{Deserialize, Serialize};

use crate::error::{NestorError, Result};
use crate::ledger::CostLedger;
use crate::problem::{sample_next, EstimateReport, EstimatorMode, History, NestedProblem};
use crate::rng::RandomStream;
use crate::schedule::{
    replication_count_in, solve_rate, truncation_level_in, EpsDomain, FloorPolicy,
    LevelDistribution, LevelSchedule,
};

/// Deepest level the single-sample estimator will expand (`2^N` inner calls).
pub const MAX_SINGLE_LEVEL: u32 = 40;

/// Which level difference a classical estimator uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaKind {
    /// `g(mean) - g(odd mean)/2 - g(even mean)/2` over `2^n` inner samples.
    Antithetic,
    /// `g(R(2^{-n/2})) - g(R(2^{-(n-1)/2}))` with two independent inner runs.
    Successive,
}

/// Level law of the batched randomized estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelKind {
    Geometric,
    Truncated,
}

fn check_stage(problem: &dyn NestedProblem, d: usize, history: &History) -> Result<()> {
    if d > problem.horizon() {
        return Err(NestorError::InvalidStage {
            stage: d,
            horizon: problem.horizon(),
        });
    }
    if history.stage() != d {
        return Err(NestorError::parameter(
            "history",
            format!(
                "history has stage {} but the estimator was asked for stage {d}",
                history.stage()
            ),
        ));
    }
    Ok(())
}

/// A call at `d > 0` stands in for an inner call, which the outer stage makes
/// with accuracies up to 1.
fn entry_domain(d: usize) -> EpsDomain {
    if d == 0 {
        EpsDomain::TopLevel
    } else {
        EpsDomain::Recursive
    }
}

/// Geometric level laws `Geo(r_d)` for stages `0..D`.
pub fn single_sample_distributions(horizon: usize, delta: f64) -> Result<Vec<LevelDistribution>> {
    (0..horizon)
        .map(|d| LevelDistribution::geometric(solve_rate(d as u32, delta)?.0))
        .collect()
}

/// One unbiased single-sample estimate of `γ_d(history)`.
///
/// `dists[k]` is the level law at stage `k`; one entry per stage below the
/// horizon is needed.
pub fn rmlmc_single(
    problem: &dyn NestedProblem,
    d: usize,
    history: &mut History,
    dists: &[LevelDistribution],
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<f64> {
    check_stage(problem, d, history)?;
    if d < problem.horizon() && dists.len() < problem.horizon() {
        return Err(NestorError::parameter(
            "dists",
            format!(
                "need {} level distributions, got {}",
                problem.horizon(),
                dists.len()
            ),
        ));
    }
    single_rec(problem, history, dists, rng, ledger)
}

fn single_rec(
    problem: &dyn NestedProblem,
    history: &mut History,
    dists: &[LevelDistribution],
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<f64> {
    let d = history.stage();
    let y = sample_next(problem, history, rng, ledger)?;
    history.push(y);
    if d == problem.horizon() {
        let v = problem.terminal_value(history.values());
        history.pop();
        return Ok(v);
    }
    let dist = &dists[d];
    let n = dist.sample(rng);
    if n > MAX_SINGLE_LEVEL {
        history.pop();
        return Err(NestorError::parameter(
            "dist",
            format!("drew level {n}; the level law is too heavy to expand 2^n inner calls"),
        ));
    }
    let count = 1u64 << n;
    let (mut odd, mut even) = (0.0, 0.0);
    for i in 0..count {
        let x = single_rec(problem, history, dists, rng, ledger)?;
        // i is zero-based, so even i is an odd-numbered sample
        if i % 2 == 0 {
            odd += x;
        } else {
            even += x;
        }
    }
    let path = history.values();
    let delta = if n == 0 {
        problem.stage_value(path, odd)
    } else {
        let half = (count / 2) as f64;
        problem.stage_value(path, (odd + even) / count as f64)
            - 0.5 * problem.stage_value(path, odd / half)
            - 0.5 * problem.stage_value(path, even / half)
    };
    let mass = dist.pmf(n);
    history.pop();
    Ok(delta / mass)
}

/// Successive-accuracy difference at a completed prefix `y_{≤d}`:
/// `g_d(y, inner(eps_fine)) - g_d(y, inner(eps_coarse))`, with the coarse
/// term dropped at `n = 0`. The two inner calls draw fresh randomness.
#[allow(clippy::too_many_arguments)]
pub fn delta_successive<F>(
    problem: &dyn NestedProblem,
    y_le_d: &mut History,
    n: u32,
    eps_fine: f64,
    eps_coarse: f64,
    inner: &mut F,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<f64>
where
    F: FnMut(&mut History, f64, &mut RandomStream, &mut CostLedger) -> Result<f64>,
{
    let fine = inner(y_le_d, eps_fine, rng, ledger)?;
    let mut delta = problem.stage_value(y_le_d.values(), fine);
    if n > 0 {
        let coarse = inner(y_le_d, eps_coarse, rng, ledger)?;
        delta -= problem.stage_value(y_le_d.values(), coarse);
    }
    Ok(delta)
}

/// Inner accuracies `(2^{-n/2}, 2^{-(n-1)/2})` of level `n`.
#[inline]
pub fn level_accuracies(n: u32) -> (f64, f64) {
    ((-(n as f64) / 2.0).exp2(), (-(n as f64 - 1.0) / 2.0).exp2())
}

/// Mean of `count` terminal payoffs `g_D` at fresh draws of `y_D`.
fn terminal_mean(
    problem: &dyn NestedProblem,
    history: &mut History,
    count: u64,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<f64> {
    let mut mean = 0.0;
    for k in 0..count {
        let y = sample_next(problem, history, rng, ledger)?;
        history.push(y);
        let v = problem.terminal_value(history.values());
        history.pop();
        mean += (v - mean) / (k + 1) as f64;
    }
    Ok(mean)
}

#[derive(Clone, Copy)]
struct BatchedParams {
    kind: LevelKind,
    delta: f64,
}

fn batched_rec(
    problem: &dyn NestedProblem,
    history: &mut History,
    eps: f64,
    params: BatchedParams,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<f64> {
    let d = history.stage();
    let l = problem.lipschitz(d);
    let m = replication_count_in(d as u32, params.delta, l, eps, EpsDomain::Recursive)?;
    if d == problem.horizon() {
        return terminal_mean(problem, history, m, rng, ledger);
    }
    let rate = solve_rate(d as u32, params.delta)?.0;
    let dist = match params.kind {
        LevelKind::Geometric => LevelDistribution::geometric(rate)?,
        LevelKind::Truncated => {
            LevelDistribution::truncated(rate, truncation_level_in(l, eps, EpsDomain::Recursive)?)?
        }
    };
    let mut inner = |h: &mut History, e: f64, rng: &mut RandomStream, ledger: &mut CostLedger| {
        batched_rec(problem, h, e, params, rng, ledger)
    };
    let mut mean = 0.0;
    for k in 0..m {
        let y = sample_next(problem, history, rng, ledger)?;
        history.push(y);
        let n = dist.sample(rng);
        let (fine, coarse) = level_accuracies(n);
        let a = delta_successive(problem, history, n, fine, coarse, &mut inner, rng, ledger);
        history.pop();
        let a = a? / dist.pmf(n);
        mean += (a - mean) / (k + 1) as f64;
    }
    Ok(mean)
}

/// Batched randomized estimator `R_d(history, ε)`.
#[allow(clippy::too_many_arguments)]
pub fn rmlmc_estimate(
    problem: &dyn NestedProblem,
    d: usize,
    history: &mut History,
    eps: f64,
    kind: LevelKind,
    delta: f64,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<EstimateReport> {
    check_stage(problem, d, history)?;
    entry_domain(d).check(eps)?;
    let mut local = CostLedger::new();
    let estimate = batched_rec(
        problem,
        history,
        eps,
        BatchedParams { kind, delta },
        rng,
        &mut local,
    )?;
    ledger.merge(&local);
    Ok(EstimateReport {
        estimate,
        target_error: eps,
        stage: d,
        ledger: local,
        seed: rng.seed(),
        replication: rng.replication(),
        mode: match kind {
            LevelKind::Geometric => EstimatorMode::BatchedGeometric,
            LevelKind::Truncated => EstimatorMode::BatchedTruncated,
        },
    })
}

/// Schedule used by the derandomized estimator at stage `d` and accuracy `ε`.
/// Levels whose share `⌊M P(n)⌋` rounds to zero still run once.
pub fn derand_schedule(d: usize, delta: f64, lipschitz: f64, eps: f64) -> Result<LevelSchedule> {
    LevelSchedule::new(
        d as u32,
        delta,
        lipschitz,
        eps,
        EpsDomain::Recursive,
        FloorPolicy::ClampToOne,
    )
}

fn derand_rec(
    problem: &dyn NestedProblem,
    history: &mut History,
    eps: f64,
    delta: f64,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<f64> {
    let d = history.stage();
    let l = problem.lipschitz(d);
    if d == problem.horizon() {
        let m = replication_count_in(d as u32, delta, l, eps, EpsDomain::Recursive)?;
        return terminal_mean(problem, history, m, rng, ledger);
    }
    let schedule = derand_schedule(d, delta, l, eps)?;
    let mut inner = |h: &mut History, e: f64, rng: &mut RandomStream, ledger: &mut CostLedger| {
        derand_rec(problem, h, e, delta, rng, ledger)
    };
    let mut total = 0.0;
    for (n, &count) in schedule.per_level.iter().enumerate() {
        let (fine, coarse) = level_accuracies(n as u32);
        let mut mean = 0.0;
        for k in 0..count {
            let y = sample_next(problem, history, rng, ledger)?;
            history.push(y);
            let a = delta_successive(
                problem, history, n as u32, fine, coarse, &mut inner, rng, ledger,
            );
            history.pop();
            mean += (a? - mean) / (k + 1) as f64;
        }
        total += mean;
    }
    Ok(total)
}

/// Derandomized multilevel estimator: exactly `M^{(n)}` replications of the
/// level-`n` difference for every `n ≤ B_d`.
pub fn derand_estimate(
    problem: &dyn NestedProblem,
    d: usize,
    history: &mut History,
    eps: f64,
    delta: f64,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<EstimateReport> {
    check_stage(problem, d, history)?;
    entry_domain(d).check(eps)?;
    let mut local = CostLedger::new();
    let estimate = derand_rec(problem, history, eps, delta, rng, &mut local)?;
    ledger.merge(&local);
    Ok(EstimateReport {
        estimate,
        target_error: eps,
        stage: d,
        ledger: local,
        seed: rng.seed(),
        replication: rng.replication(),
        mode: EstimatorMode::Derandomized,
    })
}

/// Mean of `⌈ε^{-2}⌉` independent single-sample estimates of `γ_d(history)`.
pub fn single_sample_mean(
    problem: &dyn NestedProblem,
    d: usize,
    history: &mut History,
    eps: f64,
    delta: f64,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<EstimateReport> {
    check_stage(problem, d, history)?;
    EpsDomain::TopLevel.check(eps)?;
    let dists = single_sample_distributions(problem.horizon(), delta)?;
    let runs = crate::cost::single_sample_runs(eps);
    let mut local = CostLedger::new();
    let mut estimate = 0.0;
    for k in 0..runs {
        let x = single_rec(problem, history, &dists, rng, &mut local)?;
        estimate += (x - estimate) / (k + 1) as f64;
    }
    ledger.merge(&local);
    Ok(EstimateReport {
        estimate,
        target_error: eps,
        stage: d,
        ledger: local,
        seed: rng.seed(),
        replication: rng.replication(),
        mode: EstimatorMode::Single,
    })
}
