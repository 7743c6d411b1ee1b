//! Built-in problems and the string-keyed registry.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{NestorError, Result};
use crate::problem::NestedProblem;
use crate::rng::RandomStream;

pub const PROBLEM_IDS: [&str; 5] = [
    "identity-chain",
    "gauss-rne-D1",
    "gauss-rne-D2",
    "gauss-rne-D3",
    "gauss-optstop-D2",
];

/// Optional overrides read from the `[problem]` table of a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    /// Horizon of the identity chain.
    pub horizon: Option<usize>,
    /// Point mass of the identity chain.
    pub point: Option<f64>,
    /// Starting level `x0` of the Gaussian walks.
    pub x0: Option<f64>,
    /// Floor `K` on the terminal payoff of the stopping problem.
    pub strike: Option<f64>,
}

pub fn problem_by_id(id: &str, params: &ProblemParams) -> Result<Box<dyn NestedProblem>> {
    let fixed_horizon = |d: usize| -> Result<()> {
        match params.horizon {
            Some(h) if h != d => Err(NestorError::Config(format!(
                "problem `{id}` has fixed horizon {d}, got horizon = {h}"
            ))),
            _ => Ok(()),
        }
    };
    let problem: Box<dyn NestedProblem> = match id {
        "identity-chain" => Box::new(IdentityChain::new(
            params.horizon.unwrap_or(2),
            params.point.unwrap_or(0.7),
        )),
        "gauss-rne-D1" | "gauss-rne-D2" | "gauss-rne-D3" => {
            let d = (id.as_bytes()[id.len() - 1] - b'0') as usize;
            fixed_horizon(d)?;
            Box::new(GaussRne::new(d, params.x0.unwrap_or(1.0)))
        }
        "gauss-optstop-D2" => {
            fixed_horizon(2)?;
            Box::new(GaussOptStop::new(
                2,
                params.x0.unwrap_or(0.0),
                params.strike.unwrap_or(0.0),
            ))
        }
        _ => {
            return Err(NestorError::UnknownProblem {
                id: id.to_string(),
                known: PROBLEM_IDS.join(", "),
            })
        }
    };
    Ok(problem)
}

/// `g_d(y, z) = z`, `g_D(y) = y_D`, every `y_d` equal to a fixed point.
/// Every estimator is exact on it.
#[derive(Clone, Debug)]
pub struct IdentityChain {
    horizon: usize,
    point: f64,
}

impl IdentityChain {
    pub fn new(horizon: usize, point: f64) -> Self {
        IdentityChain { horizon, point }
    }
}

impl NestedProblem for IdentityChain {
    fn id(&self) -> &str {
        "identity-chain"
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn lipschitz(&self, _d: usize) -> f64 {
        1.0
    }

    #[inline]
    fn draw(&self, _prefix: &[f64], _rng: &mut RandomStream) -> f64 {
        self.point
    }

    #[inline]
    fn stage_value(&self, _path: &[f64], z: f64) -> f64 {
        z
    }

    #[inline]
    fn terminal_value(&self, path: &[f64]) -> f64 {
        path[self.horizon]
    }

    fn terminal_bound(&self) -> f64 {
        self.point.abs().max(1.0)
    }

    fn truth(&self, _prefix: &[f64]) -> Option<f64> {
        Some(self.point)
    }
}

const SHARPNESS: f64 = 4.0;
const DAMP: f64 = 0.606_530_659_712_633_4; // e^{-1/2}

/// `ln(1 + e^{k z}) / k`: smooth, increasing, slope in (0, 1).
#[inline]
fn softplus(z: f64) -> f64 {
    let x = SHARPNESS * z;
    (x.max(0.0) + (-x.abs()).exp().ln_1p()) / SHARPNESS
}

/// Gaussian random walk `y_0 ~ N(x0, 1)`, `y_d = y_{d-1} + N(0, 1)` with
///
/// ```text
/// g_D(y) = sin(y_D)
/// g_d(y, z) = sin(y_d) + h(z) - h(e^{-1/2} sin(y_d)),   h = softplus
/// ```
///
/// Since `E[sin(y + N(0,1))] = e^{-1/2} sin(y)`, the correction terms cancel
/// at the true inner value and `γ_d = e^{-1/2} sin(y_{d-1})`.
#[derive(Clone, Debug)]
pub struct GaussRne {
    horizon: usize,
    x0: f64,
    id: String,
}

impl GaussRne {
    pub fn new(horizon: usize, x0: f64) -> Self {
        GaussRne {
            horizon,
            x0,
            id: format!("gauss-rne-D{horizon}"),
        }
    }
}

impl NestedProblem for GaussRne {
    fn id(&self) -> &str {
        &self.id
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn lipschitz(&self, _d: usize) -> f64 {
        1.0
    }

    #[inline]
    fn draw(&self, prefix: &[f64], rng: &mut RandomStream) -> f64 {
        prefix.last().copied().unwrap_or(self.x0) + rng.standard_normal()
    }

    #[inline]
    fn stage_value(&self, path: &[f64], z: f64) -> f64 {
        let s = path[path.len() - 1].sin();
        s + softplus(z) - softplus(DAMP * s)
    }

    #[inline]
    fn terminal_value(&self, path: &[f64]) -> f64 {
        path[self.horizon].sin()
    }

    fn terminal_bound(&self) -> f64 {
        1.0
    }

    fn truth(&self, prefix: &[f64]) -> Option<f64> {
        Some(DAMP * prefix.last().copied().unwrap_or(self.x0).sin())
    }
}

/// Optimal stopping of a Gaussian random walk started at `x0`, in the nested
/// form `g_d(y, z) = max(y_d, z)`, `g_D(y) = max(y_D, K)`.
///
/// The walk is a martingale and the payoff convex, so continuing is always
/// optimal and `γ_d = E[max(y_D, K) | y_{<d}]`, a Gaussian max-expectation.
#[derive(Clone, Debug)]
pub struct GaussOptStop {
    horizon: usize,
    x0: f64,
    strike: f64,
    id: String,
}

impl GaussOptStop {
    pub fn new(horizon: usize, x0: f64, strike: f64) -> Self {
        GaussOptStop {
            horizon,
            x0,
            strike,
            id: format!("gauss-optstop-D{horizon}"),
        }
    }
}

impl NestedProblem for GaussOptStop {
    fn id(&self) -> &str {
        &self.id
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn lipschitz(&self, _d: usize) -> f64 {
        1.0
    }

    #[inline]
    fn draw(&self, prefix: &[f64], rng: &mut RandomStream) -> f64 {
        prefix.last().copied().unwrap_or(self.x0) + rng.standard_normal()
    }

    #[inline]
    fn stage_value(&self, path: &[f64], z: f64) -> f64 {
        path[path.len() - 1].max(z)
    }

    #[inline]
    fn terminal_value(&self, path: &[f64]) -> f64 {
        path[self.horizon].max(self.strike)
    }

    fn terminal_bound(&self) -> f64 {
        4.0
    }

    fn truth(&self, prefix: &[f64]) -> Option<f64> {
        let mu = prefix.last().copied().unwrap_or(self.x0);
        let var = (self.horizon + 1 - prefix.len()) as f64;
        Some(gaussian_max_expectation(self.strike, mu, var.sqrt()))
    }
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `E[max(a, X)]` for `X ~ N(mu, sigma^2)`.
pub fn gaussian_max_expectation(a: f64, mu: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return a.max(mu);
    }
    let t = (a - mu) / sigma;
    a * normal_cdf(t) + mu * normal_cdf(-t) + sigma * normal_pdf(t)
}

type DrawFn = dyn Fn(&[f64], &mut RandomStream) -> f64 + Send + Sync;
type StageFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;
type TerminalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A problem assembled from closures, for experiments outside the registry.
pub struct CustomProblem {
    id: String,
    lipschitz: Vec<f64>,
    draw: Box<DrawFn>,
    stage: Box<StageFn>,
    terminal: Box<TerminalFn>,
    terminal_bound: f64,
    truth: Option<f64>,
}

impl CustomProblem {
    /// `lipschitz` holds `L_0..L_D`, so its length fixes the horizon.
    pub fn new(
        id: impl Into<String>,
        lipschitz: Vec<f64>,
        draw: impl Fn(&[f64], &mut RandomStream) -> f64 + Send + Sync + 'static,
        stage: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        terminal: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        terminal_bound: f64,
    ) -> Result<Self> {
        if lipschitz.is_empty() {
            return Err(NestorError::parameter(
                "lipschitz",
                "need one constant per stage 0..=D",
            ));
        }
        if let Some(l) = lipschitz.iter().find(|l| !(**l >= 1.0)) {
            return Err(NestorError::parameter(
                "lipschitz",
                format!("constants must be >= 1, got {l}"),
            ));
        }
        if !(terminal_bound > 0.0) {
            return Err(NestorError::parameter("terminal_bound", "must be positive"));
        }
        Ok(CustomProblem {
            id: id.into(),
            lipschitz,
            draw: Box::new(draw),
            stage: Box::new(stage),
            terminal: Box::new(terminal),
            terminal_bound,
            truth: None,
        })
    }

    /// Attaches the known value of `γ_0`.
    pub fn with_truth(mut self, value: f64) -> Self {
        self.truth = Some(value);
        self
    }
}

impl NestedProblem for CustomProblem {
    fn id(&self) -> &str {
        &self.id
    }

    fn horizon(&self) -> usize {
        self.lipschitz.len() - 1
    }

    fn lipschitz(&self, d: usize) -> f64 {
        self.lipschitz[d]
    }

    fn draw(&self, prefix: &[f64], rng: &mut RandomStream) -> f64 {
        (self.draw)(prefix, rng)
    }

    fn stage_value(&self, path: &[f64], z: f64) -> f64 {
        (self.stage)(path, z)
    }

    fn terminal_value(&self, path: &[f64]) -> f64 {
        (self.terminal)(path)
    }

    fn terminal_bound(&self) -> f64 {
        self.terminal_bound
    }

    fn truth(&self, prefix: &[f64]) -> Option<f64> {
        if prefix.is_empty() {
            self.truth
        } else {
            None
        }
    }
}
