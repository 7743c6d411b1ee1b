//! Quantum estimators run against the emulated mean-estimation oracle: the
//! direct quantization of the randomized estimator, which is charged its
//! worst level branch, and the deterministic-schedule quantum multilevel
//! estimator.

use crate::classical::{delta_successive, level_accuracies};
use crate::cost::{
    qmlmc_level_bound, qmlmc_level_target, qmlmc_truncation, DirectCosts, QmlmcCosts,
};
use crate::error::{NestorError, Result};
use crate::ledger::CostLedger;
use crate::problem::{sample_next, EstimateReport, EstimatorMode, History, NestedProblem};
use crate::qamc::{qamc_rmse_detailed, FnSampler, QamcConfig};
use crate::rng::RandomStream;
use crate::schedule::EpsDomain;

pub use crate::cost::DirectQuantParams;

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

/// Oracle call on the terminal payoff at a fresh `y_D`.
fn terminal_call(
    problem: &dyn NestedProblem,
    history: &mut History,
    eps: f64,
    config: &QamcConfig,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<(f64, u64)> {
    let mut sampler = FnSampler::new(|rng: &mut RandomStream, l: &mut CostLedger| {
        let y = sample_next(problem, history, rng, l)?;
        history.push(y);
        let v = problem.terminal_value(history.values());
        history.pop();
        Ok(v)
    });
    let out = qamc_rmse_detailed(
        &mut sampler,
        problem.terminal_bound(),
        eps,
        config,
        rng,
        ledger,
    )?;
    Ok((out.estimate, out.charged))
}

struct Direct<'a> {
    problem: &'a dyn NestedProblem,
    params: DirectQuantParams,
    config: QamcConfig,
    costs: DirectCosts,
}

impl Direct<'_> {
    fn run(
        &self,
        history: &mut History,
        eps: f64,
        rng: &mut RandomStream,
        ledger: &mut CostLedger,
    ) -> Result<f64> {
        let d = history.stage();
        let problem = self.problem;
        if d == problem.horizon() {
            let (v, charged) = terminal_call(problem, history, eps, &self.config, rng, ledger)?;
            ledger.charge(charged);
            return Ok(v);
        }
        let truncation = self.params.truncation(problem, d, eps);
        let dist = self.params.distribution(truncation);
        // every query is billed as the most expensive level branch
        let worst = (0..=truncation)
            .map(|n| {
                let (fine, coarse) = self.params.accuracies(n);
                let mut c = 1u64.saturating_add(self.costs.get(d + 1, fine).charged);
                if n > 0 {
                    c = c.saturating_add(self.costs.get(d + 1, coarse).charged);
                }
                c
            })
            .max()
            .unwrap_or(1);
        let mut inner = |h: &mut History, e: f64, rng: &mut RandomStream, l: &mut CostLedger| {
            self.run(h, e, rng, l)
        };
        let mut sampler = FnSampler::with_query_cost(
            |rng: &mut RandomStream, l: &mut CostLedger| {
                let y = sample_next(problem, history, rng, l)?;
                history.push(y);
                let n = dist.sample(rng);
                let (fine, coarse) = self.params.accuracies(n);
                let a = delta_successive(problem, history, n, fine, coarse, &mut inner, rng, l);
                history.pop();
                Ok(a? / dist.pmf(n))
            },
            worst,
        );
        let s = self.params.level_bound(problem.lipschitz(d));
        let out = qamc_rmse_detailed(&mut sampler, s, eps, &self.config, rng, ledger)?;
        ledger.charge(out.charged);
        Ok(out.estimate)
    }
}

/// Direct quantization: the oracle is applied to `A_d(y, N)/P(N)` with a
/// random level `N` drawn inside each query.
#[allow(clippy::too_many_arguments)]
pub fn direct_quantized_estimate(
    problem: &dyn NestedProblem,
    d: usize,
    history: &mut History,
    eps: f64,
    params: &DirectQuantParams,
    config: &QamcConfig,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<EstimateReport> {
    check_stage(problem, d, history)?;
    EpsDomain::Recursive.check(eps)?;
    let runner = Direct {
        problem,
        params: *params,
        config: *config,
        costs: DirectCosts::build(problem, d, eps, params, config),
    };
    let mut local = CostLedger::new();
    let estimate = runner.run(history, eps, rng, &mut local)?;
    ledger.merge(&local);
    Ok(EstimateReport {
        estimate,
        target_error: eps,
        stage: d,
        ledger: local,
        seed: rng.seed(),
        replication: rng.replication(),
        mode: EstimatorMode::DirectQuantized,
    })
}

struct Qmlmc<'a> {
    problem: &'a dyn NestedProblem,
    config: QamcConfig,
    costs: QmlmcCosts,
}

impl Qmlmc<'_> {
    /// `outer` tags charges by level on the ledger of the top-level call.
    fn run(
        &self,
        history: &mut History,
        eps: f64,
        outer: bool,
        rng: &mut RandomStream,
        ledger: &mut CostLedger,
    ) -> Result<f64> {
        let d = history.stage();
        let problem = self.problem;
        if d == problem.horizon() {
            let (v, charged) = terminal_call(problem, history, eps, &self.config, rng, ledger)?;
            if outer {
                ledger.charge_level(0, charged);
            } else {
                ledger.charge(charged);
            }
            return Ok(v);
        }
        let l = problem.lipschitz(d);
        let truncation = qmlmc_truncation(l, eps);
        let target = qmlmc_level_target(eps, truncation);
        let mut total = 0.0;
        for n in 0..=truncation {
            let (fine, coarse) = level_accuracies(n);
            let mut per_query = 1u64.saturating_add(self.costs.get(d + 1, fine).charged);
            if n > 0 {
                per_query = per_query.saturating_add(self.costs.get(d + 1, coarse).charged);
            }
            let mut inner =
                |h: &mut History, e: f64, rng: &mut RandomStream, l: &mut CostLedger| {
                    self.run(h, e, false, rng, l)
                };
            let mut sampler = FnSampler::with_query_cost(
                |rng: &mut RandomStream, l: &mut CostLedger| {
                    let y = sample_next(problem, history, rng, l)?;
                    history.push(y);
                    let a = delta_successive(problem, history, n, fine, coarse, &mut inner, rng, l);
                    history.pop();
                    a
                },
                per_query,
            );
            let out = qamc_rmse_detailed(
                &mut sampler,
                qmlmc_level_bound(l, n),
                target,
                &self.config,
                rng,
                ledger,
            )?;
            if outer {
                ledger.charge_level(n, out.charged);
            } else {
                ledger.charge(out.charged);
            }
            total += out.estimate;
        }
        Ok(total)
    }
}

/// Quantum multilevel estimator with a deterministic level schedule: one
/// oracle call per level `n ≤ B_d` on the successive difference, each at
/// RMSE `ε / (3 (B_d + 1))`.
pub fn qmlmc_estimate(
    problem: &dyn NestedProblem,
    d: usize,
    history: &mut History,
    eps: f64,
    config: &QamcConfig,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<EstimateReport> {
    check_stage(problem, d, history)?;
    EpsDomain::Recursive.check(eps)?;
    let runner = Qmlmc {
        problem,
        config: *config,
        costs: QmlmcCosts::build(problem, d, eps, config),
    };
    let mut local = CostLedger::new();
    let estimate = runner.run(history, eps, true, rng, &mut local)?;
    ledger.merge(&local);
    Ok(EstimateReport {
        estimate,
        target_error: eps,
        stage: d,
        ledger: local,
        seed: rng.seed(),
        replication: rng.replication(),
        mode: EstimatorMode::QuantumMlmc,
    })
}
