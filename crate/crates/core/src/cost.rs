//! Cost pre-passes: what an estimator will cost, computed from its schedule
//! without drawing a sample.
//!
//! Charged quantum costs are exact for both quantum estimators (they are
//! deterministic by construction). Classical costs are exact for the
//! derandomized and quantum multilevel estimators and expectations for the
//! randomized ones.

use std::collections::HashMap;

use crate::classical::level_accuracies;
use crate::error::Result;
use crate::problem::{EstimatorMode, NestedProblem};
use crate::qamc::{rmse_charge, rmse_samples, QamcConfig};
use crate::schedule::{
    ceil_tol, replication_count_in, replication_mass, solve_rate, truncation_level_in, EpsDomain,
    FloorPolicy, LevelDistribution, LevelSchedule,
};

/// Levels of the geometric law summed before the tail is dropped.
const GEOMETRIC_TERMS: u32 = 400;

/// Charged queries and classical steps of one estimator call.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CallCost {
    pub charged: u64,
    pub classical: f64,
}

type Memo = HashMap<(usize, u64), CallCost>;

/// Truncation `⌈2 log2(L/ε)⌉` (at least 0) of the quantum multilevel estimator.
pub fn qmlmc_truncation(lipschitz: f64, eps: f64) -> u32 {
    ceil_tol(2.0 * (lipschitz / eps).log2(), 1e-6).max(0.0) as u32
}

/// Second-moment bound `3 L 2^{-n/2}` of the level-`n` difference.
pub fn qmlmc_level_bound(lipschitz: f64, n: u32) -> f64 {
    3.0 * lipschitz * (-(n as f64) / 2.0).exp2()
}

/// Per-level RMSE target `ε / (3 (B + 1))`.
pub fn qmlmc_level_target(eps: f64, truncation: u32) -> f64 {
    eps / (3.0 * (truncation as f64 + 1.0))
}

/// Exact cost table of the quantum multilevel estimator, keyed by stage and
/// accuracy. Built once per top-level call and shared by the recursion.
#[derive(Clone, Debug, Default)]
pub struct QmlmcCosts {
    memo: Memo,
}

impl QmlmcCosts {
    pub fn build(problem: &dyn NestedProblem, d: usize, eps: f64, config: &QamcConfig) -> Self {
        let mut memo = Memo::new();
        qmlmc_cost_rec(problem, d, eps, config, &mut memo);
        QmlmcCosts { memo }
    }

    pub fn get(&self, d: usize, eps: f64) -> CallCost {
        self.memo[&(d, eps.to_bits())]
    }
}

fn qmlmc_cost_rec(
    problem: &dyn NestedProblem,
    d: usize,
    eps: f64,
    config: &QamcConfig,
    memo: &mut Memo,
) -> CallCost {
    if let Some(c) = memo.get(&(d, eps.to_bits())) {
        return *c;
    }
    let cost = if d == problem.horizon() {
        let s = problem.terminal_bound();
        CallCost {
            charged: rmse_charge(s, eps, config),
            classical: rmse_samples(s, eps) as f64,
        }
    } else {
        let l = problem.lipschitz(d);
        let b = qmlmc_truncation(l, eps);
        let target = qmlmc_level_target(eps, b);
        let mut total = CallCost::default();
        for n in 0..=b {
            let (fine, coarse) = level_accuracies(n);
            let mut per_query = CallCost {
                charged: 1,
                classical: 1.0,
            };
            let f = qmlmc_cost_rec(problem, d + 1, fine, config, memo);
            per_query.charged = per_query.charged.saturating_add(f.charged);
            per_query.classical += f.classical;
            if n > 0 {
                let c = qmlmc_cost_rec(problem, d + 1, coarse, config, memo);
                per_query.charged = per_query.charged.saturating_add(c.charged);
                per_query.classical += c.classical;
            }
            let s = qmlmc_level_bound(l, n);
            total.charged = total
                .charged
                .saturating_add(rmse_charge(s, target, config).saturating_mul(per_query.charged));
            total.classical += rmse_samples(s, target) as f64 * per_query.classical;
        }
        total
    };
    memo.insert((d, eps.to_bits()), cost);
    cost
}

/// Parameters of the direct quantization of the randomized estimator.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DirectQuantParams {
    pub r: f64,
    pub alpha: f64,
}

impl Default for DirectQuantParams {
    fn default() -> Self {
        DirectQuantParams {
            r: 0.5,
            alpha: 2.0 / 3.0,
        }
    }
}

impl DirectQuantParams {
    pub fn new(r: f64, alpha: f64) -> Result<Self> {
        let ratio = alpha * alpha / (1.0 - r);
        if !(r > 0.0 && r < 1.0 && alpha > 0.0 && alpha < 1.0 && ratio < 1.0) {
            return Err(crate::error::NestorError::parameter(
                "alpha",
                format!("need 0 < alpha^2/(1 - r) < 1, got r = {r}, alpha = {alpha}"),
            ));
        }
        Ok(DirectQuantParams { r, alpha })
    }

    /// `B_d = ⌈ln(ε / (sqrt(D) L_0⋯L_d)) / ln α⌉`, at least 0.
    pub fn truncation(&self, problem: &dyn NestedProblem, d: usize, eps: f64) -> u32 {
        let prod: f64 = (0..=d).map(|k| problem.lipschitz(k)).product();
        let scale = (problem.horizon() as f64).sqrt() * prod;
        ceil_tol((eps / scale).ln() / self.alpha.ln(), 1e-9).max(0.0) as u32
    }

    /// `C` in `E[(A/P(N))²] ≤ C L_d²`: `2 (1 + α^{-2}) / (r (1 - α²/(1 - r)))`.
    pub fn moment_constant(&self) -> f64 {
        let a2 = self.alpha * self.alpha;
        2.0 * (1.0 + 1.0 / a2) / (self.r * (1.0 - a2 / (1.0 - self.r)))
    }

    pub fn level_bound(&self, lipschitz: f64) -> f64 {
        self.moment_constant().sqrt() * lipschitz
    }

    /// Inner accuracies `(α^n, α^{n-1})`.
    pub fn accuracies(&self, n: u32) -> (f64, f64) {
        (self.alpha.powi(n as i32), self.alpha.powi(n as i32 - 1))
    }

    pub fn distribution(&self, truncation: u32) -> LevelDistribution {
        LevelDistribution::Truncated {
            rate: self.r,
            truncation,
        }
    }
}

/// Cost table of the direct quantization: charged cost is the worst branch
/// over levels, classical cost the expectation over the level law.
#[derive(Clone, Debug, Default)]
pub struct DirectCosts {
    memo: Memo,
}

impl DirectCosts {
    pub fn build(
        problem: &dyn NestedProblem,
        d: usize,
        eps: f64,
        params: &DirectQuantParams,
        config: &QamcConfig,
    ) -> Self {
        let mut memo = Memo::new();
        direct_cost_rec(problem, d, eps, params, config, &mut memo);
        DirectCosts { memo }
    }

    pub fn get(&self, d: usize, eps: f64) -> CallCost {
        self.memo[&(d, eps.to_bits())]
    }
}

fn direct_cost_rec(
    problem: &dyn NestedProblem,
    d: usize,
    eps: f64,
    params: &DirectQuantParams,
    config: &QamcConfig,
    memo: &mut Memo,
) -> CallCost {
    if let Some(c) = memo.get(&(d, eps.to_bits())) {
        return *c;
    }
    let cost = if d == problem.horizon() {
        let s = problem.terminal_bound();
        CallCost {
            charged: rmse_charge(s, eps, config),
            classical: rmse_samples(s, eps) as f64,
        }
    } else {
        let b = params.truncation(problem, d, eps);
        let dist = params.distribution(b);
        let mut worst: u64 = 0;
        let mut expected = 1.0;
        for n in 0..=b {
            let (fine, coarse) = params.accuracies(n);
            let f = direct_cost_rec(problem, d + 1, fine, params, config, memo);
            let mut branch = 1u64.saturating_add(f.charged);
            let mut steps = f.classical;
            if n > 0 {
                let c = direct_cost_rec(problem, d + 1, coarse, params, config, memo);
                branch = branch.saturating_add(c.charged);
                steps += c.classical;
            }
            worst = worst.max(branch);
            expected += dist.pmf(n) * steps;
        }
        let s = params.level_bound(problem.lipschitz(d));
        CallCost {
            charged: rmse_charge(s, eps, config).saturating_mul(worst),
            classical: rmse_samples(s, eps) as f64 * expected,
        }
    };
    memo.insert((d, eps.to_bits()), cost);
    cost
}

/// Exact classical steps of the derandomized estimator.
pub fn derand_classical_cost(
    problem: &dyn NestedProblem,
    d: usize,
    eps: f64,
    delta: f64,
) -> Result<f64> {
    let mut memo = HashMap::new();
    derand_rec(problem, d, eps, delta, &mut memo)
}

fn derand_rec(
    problem: &dyn NestedProblem,
    d: usize,
    eps: f64,
    delta: f64,
    memo: &mut HashMap<(usize, u64), f64>,
) -> Result<f64> {
    if let Some(c) = memo.get(&(d, eps.to_bits())) {
        return Ok(*c);
    }
    let l = problem.lipschitz(d);
    let cost = if d == problem.horizon() {
        replication_count_in(d as u32, delta, l, eps, EpsDomain::Recursive)? as f64
    } else {
        let schedule = LevelSchedule::new(
            d as u32,
            delta,
            l,
            eps,
            EpsDomain::Recursive,
            FloorPolicy::ClampToOne,
        )?;
        let mut total = 0.0;
        for (n, &count) in schedule.per_level.iter().enumerate() {
            let (fine, coarse) = level_accuracies(n as u32);
            let mut per = 1.0 + derand_rec(problem, d + 1, fine, delta, memo)?;
            if n > 0 {
                per += derand_rec(problem, d + 1, coarse, delta, memo)?;
            }
            total += count as f64 * per;
        }
        total
    };
    memo.insert((d, eps.to_bits()), cost);
    Ok(cost)
}

/// Expected classical steps of the batched randomized estimator. The
/// geometric law is summed over its first few hundred levels.
pub fn batched_classical_cost(
    problem: &dyn NestedProblem,
    d: usize,
    eps: f64,
    truncated: bool,
    delta: f64,
) -> Result<f64> {
    let mut memo = HashMap::new();
    batched_rec(problem, d, eps, truncated, delta, &mut memo)
}

fn batched_rec(
    problem: &dyn NestedProblem,
    d: usize,
    eps: f64,
    truncated: bool,
    delta: f64,
    memo: &mut HashMap<(usize, u64), f64>,
) -> Result<f64> {
    if let Some(c) = memo.get(&(d, eps.to_bits())) {
        return Ok(*c);
    }
    let l = problem.lipschitz(d);
    // deep geometric levels ask for counts past u64; the expectation is still finite
    let m = if eps < 1e-6 {
        ceil_tol(replication_mass(d as u32, delta, l, eps), 0.0).max(1.0)
    } else {
        replication_count_in(d as u32, delta, l, eps, EpsDomain::Recursive)? as f64
    };
    let cost = if d == problem.horizon() {
        m
    } else {
        let rate = solve_rate(d as u32, delta)?.0;
        let (dist, top) = if truncated {
            let b = truncation_level_in(l, eps, EpsDomain::Recursive)?;
            (LevelDistribution::truncated(rate, b)?, b)
        } else {
            (LevelDistribution::geometric(rate)?, GEOMETRIC_TERMS)
        };
        let mut per = 1.0;
        for n in 0..=top {
            let p = dist.pmf(n);
            if p == 0.0 {
                break;
            }
            let (fine, coarse) = level_accuracies(n);
            let mut inner = batched_rec(problem, d + 1, fine, truncated, delta, memo)?;
            if n > 0 {
                inner += batched_rec(problem, d + 1, coarse, truncated, delta, memo)?;
            }
            per += p * inner;
        }
        m * per
    };
    memo.insert((d, eps.to_bits()), cost);
    Ok(cost)
}

/// Expected classical steps of one single-sample estimate from stage `d`:
/// `E_D = 1`, `E_d = 1 + E[2^N] E_{d+1}` with `E[2^N] = r / (1 - 2(1 - r))`.
pub fn single_sample_cost(problem: &dyn NestedProblem, d: usize, delta: f64) -> Result<f64> {
    let mut cost = 1.0;
    for k in (d..problem.horizon()).rev() {
        let r = solve_rate(k as u32, delta)?.0;
        let q = 1.0 - r;
        let fanout = if 2.0 * q < 1.0 {
            r / (1.0 - 2.0 * q)
        } else {
            f64::INFINITY
        };
        cost = 1.0 + fanout * cost;
    }
    Ok(cost)
}

/// Runs per single-sample mean at accuracy `ε`: `⌈ε^{-2}⌉`.
pub fn single_sample_runs(eps: f64) -> u64 {
    let x = 1.0 / (eps * eps);
    ceil_tol(x, 1e-9 * x).max(1.0) as u64
}

/// Classical steps one estimator call is expected to take.
pub fn estimated_classical_cost(
    problem: &dyn NestedProblem,
    mode: EstimatorMode,
    eps: f64,
    delta: f64,
    config: &QamcConfig,
) -> Result<f64> {
    match mode {
        EstimatorMode::Single => {
            Ok(single_sample_runs(eps) as f64 * single_sample_cost(problem, 0, delta)?)
        }
        EstimatorMode::BatchedGeometric => batched_classical_cost(problem, 0, eps, false, delta),
        EstimatorMode::BatchedTruncated => batched_classical_cost(problem, 0, eps, true, delta),
        EstimatorMode::Derandomized => derand_classical_cost(problem, 0, eps, delta),
        EstimatorMode::DirectQuantized => {
            Ok(
                DirectCosts::build(problem, 0, eps, &DirectQuantParams::default(), config)
                    .get(0, eps)
                    .classical,
            )
        }
        EstimatorMode::QuantumMlmc => Ok(QmlmcCosts::build(problem, 0, eps, config)
            .get(0, eps)
            .classical),
    }
}

/// Charged quantum queries of one call (zero for classical estimators).
pub fn charged_cost(
    problem: &dyn NestedProblem,
    mode: EstimatorMode,
    eps: f64,
    config: &QamcConfig,
) -> u64 {
    match mode {
        EstimatorMode::DirectQuantized => {
            DirectCosts::build(problem, 0, eps, &DirectQuantParams::default(), config)
                .get(0, eps)
                .charged
        }
        EstimatorMode::QuantumMlmc => {
            QmlmcCosts::build(problem, 0, eps, config)
                .get(0, eps)
                .charged
        }
        _ => 0,
    }
}
