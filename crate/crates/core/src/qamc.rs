//! Emulated quantum mean estimation.
//!
//! Each call produces an estimate that honestly meets the stated error
//! contract from classical samples, and charges the ledger the query count a
//! quantum mean estimator would need. The two counts are kept apart: samples
//! drawn show up as classical steps, the quantum bill as `quantum_charged`.

use serde::{Deserialize, Serialize};

use crate::error::{NestorError, Result};
use crate::ledger::CostLedger;
use crate::rng::RandomStream;
use crate::schedule::ceil_tol;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QamcConfig {
    /// Leading constant of the charged query count.
    pub kappa: f64,
    /// Smallest charge of any call.
    pub min_charge: u64,
}

impl Default for QamcConfig {
    fn default() -> Self {
        QamcConfig {
            kappa: 1.0,
            min_charge: 1,
        }
    }
}

impl QamcConfig {
    pub fn new(kappa: f64, min_charge: u64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(NestorError::parameter(
                "kappa",
                format!("must be positive, got {kappa}"),
            ));
        }
        if min_charge == 0 {
            return Err(NestorError::parameter("min_charge", "must be at least 1"));
        }
        Ok(QamcConfig { kappa, min_charge })
    }
}

/// A randomized real-valued procedure whose mean is wanted.
///
/// `sample` records the classical steps it consumes on `ledger`.
/// `query_cost` is what one quantum query to the procedure is charged,
/// including everything it calls.
pub trait MeanSampler {
    fn sample(&mut self, rng: &mut RandomStream, ledger: &mut CostLedger) -> Result<f64>;

    fn query_cost(&self) -> u64 {
        1
    }
}

/// Adapts a closure into a [`MeanSampler`] with a fixed per-query cost.
pub struct FnSampler<F> {
    f: F,
    cost: u64,
}

impl<F> FnSampler<F>
where
    F: FnMut(&mut RandomStream, &mut CostLedger) -> Result<f64>,
{
    pub fn new(f: F) -> Self {
        FnSampler { f, cost: 1 }
    }

    pub fn with_query_cost(f: F, cost: u64) -> Self {
        FnSampler { f, cost }
    }
}

impl<F> MeanSampler for FnSampler<F>
where
    F: FnMut(&mut RandomStream, &mut CostLedger) -> Result<f64>,
{
    fn sample(&mut self, rng: &mut RandomStream, ledger: &mut CostLedger) -> Result<f64> {
        (self.f)(rng, ledger)
    }

    fn query_cost(&self) -> u64 {
        self.cost
    }
}

fn charge_from(x: f64, config: &QamcConfig) -> u64 {
    let q = ceil_tol(config.kappa * x, 1e-9 * (config.kappa * x).max(1.0));
    if q >= u64::MAX as f64 {
        u64::MAX
    } else {
        (q.max(0.0) as u64).max(config.min_charge)
    }
}

/// Queries charged for an RMSE-`ε` estimate with second-moment bound `s`:
/// `max(min_charge, ⌈κ (s/ε) max(1, log2(s/ε))⌉)`.
pub fn rmse_charge(s_bound: f64, eps: f64, config: &QamcConfig) -> u64 {
    let ratio = s_bound / eps;
    charge_from(ratio * ratio.log2().max(1.0), config)
}

/// Queries charged for an `(ε, δ)` estimate: `max(min_charge, ⌈κ (σ/ε) ln(1/δ)⌉)`.
pub fn eps_delta_charge(sigma: f64, eps: f64, delta: f64, config: &QamcConfig) -> u64 {
    charge_from(sigma / eps * (1.0 / delta).ln(), config)
}

/// Classical sample count behind an RMSE call, `⌈s²/ε²⌉`.
pub fn rmse_samples(s_bound: f64, eps: f64) -> u64 {
    let x = (s_bound / eps).powi(2);
    ceil_tol(x, 1e-9 * x.max(1.0)).max(1.0) as u64
}

/// Median-of-means layout `(groups, group size)` of an `(ε, δ)` call.
pub fn median_of_means_layout(sigma: f64, eps: f64, delta: f64) -> (u64, u64) {
    let k = ceil_tol(8.0 * (1.0 / delta).ln(), 1e-9).max(1.0) as u64;
    let m = ceil_tol(4.0 * sigma * sigma / (eps * eps), 1e-9).max(1.0) as u64;
    (k, m)
}

/// Runs the sampler, merging its classical steps into `ledger` and dropping
/// whatever it charged itself: the caller's charge already covers it
/// through `query_cost`.
fn draw<S: MeanSampler + ?Sized>(
    sampler: &mut S,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<f64> {
    let mut scratch = CostLedger::new();
    let x = sampler.sample(rng, &mut scratch);
    ledger.add_steps(scratch.classical_steps);
    x
}

/// Estimate with `P(|X̂ - EX| > ε) ≤ δ`, by median of means.
pub fn qamc_eps_delta<S: MeanSampler + ?Sized>(
    sampler: &mut S,
    sigma: f64,
    eps: f64,
    delta: f64,
    config: &QamcConfig,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(NestorError::parameter(
            "sigma",
            format!("must be positive, got {sigma}"),
        ));
    }
    if !(eps > 0.0) {
        return Err(NestorError::parameter(
            "eps",
            format!("must be positive, got {eps}"),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(NestorError::parameter(
            "delta",
            format!("{delta} is outside (0, 1)"),
        ));
    }
    let (k, m) = median_of_means_layout(sigma, eps, delta);
    let mut means = Vec::with_capacity(k as usize);
    for _ in 0..k {
        let mut mean = 0.0;
        for j in 0..m {
            let x = draw(sampler, rng, ledger)?;
            mean += (x - mean) / (j + 1) as f64;
        }
        means.push(mean);
    }
    means.sort_by(f64::total_cmp);
    let mid = means.len() / 2;
    let median = if means.len() % 2 == 1 {
        means[mid]
    } else {
        0.5 * (means[mid - 1] + means[mid])
    };
    ledger.charge(eps_delta_charge(sigma, eps, delta, config).saturating_mul(sampler.query_cost()));
    Ok(median)
}

/// Everything one RMSE call produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QamcOutcome {
    /// Clipped estimate `φ_s(X̃)`.
    pub estimate: f64,
    /// Plain sample mean `X̃` before clipping.
    pub raw_mean: f64,
    pub samples: u64,
    /// Total charge of the call, per-query cost included.
    pub charged: u64,
}

/// Like [`qamc_rmse`] but leaves the charge to the caller.
pub fn qamc_rmse_detailed<S: MeanSampler + ?Sized>(
    sampler: &mut S,
    s_bound: f64,
    eps: f64,
    config: &QamcConfig,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<QamcOutcome> {
    if !(s_bound > 0.0) {
        return Err(NestorError::parameter(
            "s_bound",
            format!("must be positive, got {s_bound}"),
        ));
    }
    if !(eps > 0.0) {
        return Err(NestorError::parameter(
            "eps",
            format!("must be positive, got {eps}"),
        ));
    }
    let n = rmse_samples(s_bound, eps);
    let mut mean = 0.0;
    for j in 0..n {
        let x = draw(sampler, rng, ledger)?;
        mean += (x - mean) / (j + 1) as f64;
    }
    Ok(QamcOutcome {
        estimate: mean.clamp(-s_bound, s_bound),
        raw_mean: mean,
        samples: n,
        charged: rmse_charge(s_bound, eps, config).saturating_mul(sampler.query_cost()),
    })
}

/// Estimate with RMSE at most `ε`, given `E[X²] ≤ s²`: the mean of
/// `⌈s²/ε²⌉` samples clipped to `[-s, s]`.
pub fn qamc_rmse<S: MeanSampler + ?Sized>(
    sampler: &mut S,
    s_bound: f64,
    eps: f64,
    config: &QamcConfig,
    rng: &mut RandomStream,
    ledger: &mut CostLedger,
) -> Result<f64> {
    let out = qamc_rmse_detailed(sampler, s_bound, eps, config, rng, ledger)?;
    ledger.charge(out.charged);
    Ok(out.estimate)
}
