//! Browser bindings: level schedules, cost curves and single estimates.
//!
//! Each export returns a JSON string; the page parses it and draws on a
//! canvas. The plain `*_json` functions carry the logic so they can be tested
//! natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use nestor::bench::slope::fit_log_log;
use nestor::bench::study::run_estimator;
use nestor::cost::{charged_cost, estimated_classical_cost};
use nestor::schedule::{EpsDomain, FloorPolicy, LevelSchedule};
use nestor::{problem_by_id, EstimatorMode, ProblemParams, QamcConfig, RandomStream, PROBLEM_IDS};

/// Largest estimated classical cost the page will simulate in one click.
pub const BROWSER_STEP_LIMIT: f64 = 2e7;

#[derive(Serialize)]
struct ScheduleView {
    rate: f64,
    rho: f64,
    p: f64,
    truncation: u32,
    replications: u64,
    pmf: Vec<f64>,
    counts: Vec<u64>,
    /// Levels where `⌊M P(n)⌋` is zero and one replication runs instead.
    clamped: Vec<u32>,
}

pub fn level_schedule_json(d: u32, delta: f64, lipschitz: f64, eps: f64) -> Result<String, String> {
    let s = LevelSchedule::new(
        d,
        delta,
        lipschitz,
        eps,
        EpsDomain::TopLevel,
        FloorPolicy::ClampToOne,
    )
    .map_err(|e| e.to_string())?;
    let dist = s.distribution();
    let pmf: Vec<f64> = (0..=s.truncation).map(|n| dist.pmf(n)).collect();
    let clamped = pmf
        .iter()
        .enumerate()
        .filter(|(_, p)| (s.replications as f64 * **p * (1.0 + 1e-12)).floor() == 0.0)
        .map(|(n, _)| n as u32)
        .collect();
    let view = ScheduleView {
        rate: s.rate,
        rho: s.rho,
        p: s.p,
        truncation: s.truncation,
        replications: s.replications,
        pmf,
        counts: s.per_level.clone(),
        clamped,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Curve {
    estimator: &'static str,
    kind: &'static str,
    values: Vec<f64>,
    slope: Option<f64>,
}

#[derive(Serialize)]
struct CostView {
    eps: Vec<f64>,
    curves: Vec<Curve>,
}

/// Pre-pass costs on a ratio-2 grid starting at `eps_max`.
pub fn cost_curves_json(
    problem_id: &str,
    eps_max: f64,
    points: u32,
    delta: f64,
) -> Result<String, String> {
    if !(eps_max > 0.0 && eps_max < 1.0) || !(2..=12).contains(&points) {
        return Err("need eps_max in (0, 1) and 2 to 12 points".into());
    }
    let problem =
        problem_by_id(problem_id, &ProblemParams::default()).map_err(|e| e.to_string())?;
    let q = QamcConfig::default();
    let eps: Vec<f64> = (0..points).map(|k| eps_max / 2f64.powi(k as i32)).collect();
    let fit = |values: &[f64]| fit_log_log(&eps, values, 0).ok().map(|f| f.slope);
    let mut curves = Vec::new();
    for mode in [
        EstimatorMode::Derandomized,
        EstimatorMode::DirectQuantized,
        EstimatorMode::QuantumMlmc,
    ] {
        let classical: Vec<f64> = eps
            .iter()
            .map(|&e| estimated_classical_cost(problem.as_ref(), mode, e, delta, &q))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        if mode.is_quantum() {
            let charged: Vec<f64> = eps
                .iter()
                .map(|&e| charged_cost(problem.as_ref(), mode, e, &q) as f64)
                .collect();
            curves.push(Curve {
                estimator: mode.name(),
                kind: "charged",
                slope: fit(&charged),
                values: charged,
            });
        }
        curves.push(Curve {
            estimator: mode.name(),
            kind: "classical",
            slope: fit(&classical),
            values: classical,
        });
    }
    serde_json::to_string(&CostView { eps, curves }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct EstimateView {
    estimate: f64,
    truth: Option<f64>,
    classical_steps: u64,
    quantum_charged: u64,
}

pub fn estimate_json(
    problem_id: &str,
    estimator: &str,
    eps: f64,
    seed: u64,
) -> Result<String, String> {
    let problem =
        problem_by_id(problem_id, &ProblemParams::default()).map_err(|e| e.to_string())?;
    let mode: EstimatorMode = estimator
        .parse()
        .map_err(|e: nestor::NestorError| e.to_string())?;
    let q = QamcConfig::default();
    let delta = nestor::schedule::DEFAULT_DELTA;
    let cost = estimated_classical_cost(problem.as_ref(), mode, eps, delta, &q)
        .map_err(|e| e.to_string())?;
    if cost > BROWSER_STEP_LIMIT {
        return Err(format!(
            "about {cost:.2e} process steps; the page stops at {BROWSER_STEP_LIMIT:.0e}, try a larger eps"
        ));
    }
    let mut rng = RandomStream::new(seed);
    let r = run_estimator(problem.as_ref(), mode, eps, delta, &q, &mut rng)
        .map_err(|e| e.to_string())?;
    let view = EstimateView {
        estimate: r.estimate,
        truth: problem.truth(&[]),
        classical_steps: r.ledger.classical_steps,
        quantum_charged: r.ledger.quantum_charged,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn problems() -> String {
    serde_json::to_string(&PROBLEM_IDS).unwrap_or_default()
}

#[wasm_bindgen]
pub fn level_schedule(d: u32, delta: f64, lipschitz: f64, eps: f64) -> Result<String, JsValue> {
    level_schedule_json(d, delta, lipschitz, eps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn cost_curves(
    problem_id: &str,
    eps_max: f64,
    points: u32,
    delta: f64,
) -> Result<String, JsValue> {
    cost_curves_json(problem_id, eps_max, points, delta).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn estimate(problem_id: &str, estimator: &str, eps: f64, seed: u64) -> Result<String, JsValue> {
    estimate_json(problem_id, estimator, eps, seed).map_err(|e| JsValue::from_str(&e))
}
