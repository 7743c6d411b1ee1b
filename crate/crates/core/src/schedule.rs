//! Level distributions and the tuning parameters `r_d`, `B_d`, `M_d`,
//! `M_d^{(n)}` of the classical multilevel estimators.

use serde::{Deserialize, Serialize};

use crate::error::{NestorError, Result};
use crate::rng::RandomStream;

pub const DEFAULT_DELTA: f64 = 0.25;

/// Accuracy arguments handed down a recursion reach `2^0 = 1` (and the
/// quantum estimators admit up to `sqrt 2`), so inner stages accept a wider
/// range than a top-level request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpsDomain {
    /// `ε ∈ (0, 1)`.
    TopLevel,
    /// `ε ∈ (0, sqrt 2]`.
    Recursive,
}

impl EpsDomain {
    pub fn check(self, eps: f64) -> Result<()> {
        let ok = match self {
            EpsDomain::TopLevel => eps > 0.0 && eps < 1.0,
            EpsDomain::Recursive => eps > 0.0 && eps <= std::f64::consts::SQRT_2,
        };
        if ok {
            Ok(())
        } else {
            let range = match self {
                EpsDomain::TopLevel => "(0, 1)",
                EpsDomain::Recursive => "(0, sqrt 2]",
            };
            Err(NestorError::parameter(
                "eps",
                format!("{eps} is outside {range}"),
            ))
        }
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 0.5 {
        Ok(())
    } else {
        Err(NestorError::parameter(
            "delta",
            format!("{delta} is outside (0, 1/2]"),
        ))
    }
}

pub(crate) fn check_lipschitz(l: f64) -> Result<()> {
    if l >= 1.0 && l.is_finite() {
        Ok(())
    } else {
        Err(NestorError::parameter(
            "lipschitz",
            format!("need L >= 1, got {l}"),
        ))
    }
}

/// Ceiling that ignores round-off just above an integer.
pub(crate) fn ceil_tol(x: f64, tol: f64) -> f64 {
    (x - tol).ceil()
}

/// Floor that ignores round-off just below an integer.
pub(crate) fn floor_tol(x: f64) -> f64 {
    (x * (1.0 + 1e-12)).floor()
}

/// `1 - r_d = 2^{-(2 + a)/(2 - a)}` with `a = δ/2^d`.
fn one_minus_rate(d: u32, delta: f64) -> f64 {
    let a = delta / 2f64.powi(d as i32);
    (-(2.0 + a) / (2.0 - a)).exp2()
}

/// Level rate `r_d` and contraction factor `ρ_d = (1 - r_d) 2^{1 + δ/2^{d+1}}`.
pub fn solve_rate(d: u32, delta: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    let q = one_minus_rate(d, delta);
    let rho = q * (1.0 + delta / 2f64.powi(d as i32 + 1)).exp2();
    Ok((1.0 - q, rho))
}

/// The second expression for `ρ_d`, `(1 - r_d)^{-1 + δ/2^d} 2^{-1 - δ/2^{d+1}}`.
/// It equals the first at the closed-form rate; kept as a cross-check.
pub fn rho_alt(d: u32, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let q = one_minus_rate(d, delta);
    let a = delta / 2f64.powi(d as i32);
    Ok(q.powf(-1.0 + a) * (-1.0 - a / 2.0).exp2())
}

/// Moment order `p_d = 2 - δ/2^d`.
pub fn moment_order(d: u32, delta: f64) -> f64 {
    2.0 - delta / 2f64.powi(d as i32)
}

/// `B_d = ⌈2 log2(2 L_d / ε)⌉` for a top-level `ε ∈ (0, 1)`.
pub fn truncation_level(lipschitz: f64, eps: f64) -> Result<u32> {
    truncation_level_in(lipschitz, eps, EpsDomain::TopLevel)
}

pub fn truncation_level_in(lipschitz: f64, eps: f64, domain: EpsDomain) -> Result<u32> {
    domain.check(eps)?;
    check_lipschitz(lipschitz)?;
    let b = ceil_tol(2.0 * (2.0 * lipschitz / eps).log2(), 1e-6);
    Ok(b.max(0.0) as u32)
}

/// `M_d = ⌈(2 L_d)^{2 + δ/2^{d-2}} ε^{-2(1 + δ/2^{d-1})}⌉`.
pub fn replication_count(d: u32, delta: f64, lipschitz: f64, eps: f64) -> Result<u64> {
    replication_count_in(d, delta, lipschitz, eps, EpsDomain::TopLevel)
}

pub fn replication_count_in(
    d: u32,
    delta: f64,
    lipschitz: f64,
    eps: f64,
    domain: EpsDomain,
) -> Result<u64> {
    domain.check(eps)?;
    check_delta(delta)?;
    check_lipschitz(lipschitz)?;
    let x = replication_mass(d, delta, lipschitz, eps);
    if !(x < 1.8e19) {
        return Err(NestorError::parameter(
            "eps",
            format!("replication count {x:e} overflows"),
        ));
    }
    Ok((ceil_tol(x, x * 1e-12) as u64).max(1))
}

/// The real number `M_d` is the ceiling of.
pub fn replication_mass(d: u32, delta: f64, lipschitz: f64, eps: f64) -> f64 {
    let c = (2.0 * lipschitz).powf(2.0 + delta * 2f64.powi(2 - d as i32));
    c * eps.powf(-2.0 * (1.0 + delta * 2f64.powi(1 - d as i32)))
}

/// Law of the random level `N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LevelDistribution {
    /// `P(n) = r (1 - r)^n`, `n ≥ 0`.
    Geometric { rate: f64 },
    /// `P(n) ∝ (1 - r)^n` on `0..=truncation`.
    Truncated { rate: f64, truncation: u32 },
}

impl LevelDistribution {
    pub fn geometric(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(LevelDistribution::Geometric { rate })
    }

    pub fn truncated(rate: f64, truncation: u32) -> Result<Self> {
        check_rate(rate)?;
        Ok(LevelDistribution::Truncated { rate, truncation })
    }

    pub fn rate(&self) -> f64 {
        match *self {
            LevelDistribution::Geometric { rate } | LevelDistribution::Truncated { rate, .. } => {
                rate
            }
        }
    }

    /// Largest level with positive mass, if finite.
    pub fn truncation(&self) -> Option<u32> {
        match *self {
            LevelDistribution::Geometric { .. } => None,
            LevelDistribution::Truncated { truncation, .. } => Some(truncation),
        }
    }

    pub fn pmf(&self, n: u32) -> f64 {
        match *self {
            LevelDistribution::Geometric { rate } => rate * (1.0 - rate).powi(n as i32),
            LevelDistribution::Truncated { rate, truncation } => {
                if n > truncation {
                    return 0.0;
                }
                let q = 1.0 - rate;
                rate * q.powi(n as i32) / (1.0 - q.powi(truncation as i32 + 1))
            }
        }
    }

    /// Inverse-CDF draw.
    pub fn sample(&self, rng: &mut RandomStream) -> u32 {
        let u = rng.uniform();
        let q = 1.0 - self.rate();
        match *self {
            LevelDistribution::Geometric { .. } => {
                let n = ((1.0 - u).ln() / q.ln()).floor();
                if n >= u32::MAX as f64 {
                    u32::MAX
                } else {
                    n as u32
                }
            }
            LevelDistribution::Truncated { truncation, .. } => {
                let mass = 1.0 - q.powi(truncation as i32 + 1);
                let n = ((1.0 - u * mass).ln() / q.ln()).floor();
                (n.max(0.0) as u32).min(truncation)
            }
        }
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate < 1.0 {
        Ok(())
    } else {
        Err(NestorError::parameter(
            "rate",
            format!("{rate} is outside (0, 1)"),
        ))
    }
}

/// What to do when `⌊M P(n)⌋` comes out zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FloorPolicy {
    /// Fail with [`NestorError::ScheduleInfeasible`].
    Strict,
    /// Run one replication at that level instead.
    ClampToOne,
}

/// `M^{(n)} = ⌊M P(n)⌋` for `n = 0..=B`.
pub fn per_level_counts(replications: u64, dist: &LevelDistribution) -> Result<Vec<u64>> {
    per_level_counts_with(replications, dist, FloorPolicy::Strict)
}

pub fn per_level_counts_with(
    replications: u64,
    dist: &LevelDistribution,
    policy: FloorPolicy,
) -> Result<Vec<u64>> {
    let truncation = dist.truncation().ok_or_else(|| {
        NestorError::parameter(
            "dist",
            "per-level counts need a truncated level distribution",
        )
    })?;
    (0..=truncation)
        .map(|n| {
            let mass = dist.pmf(n);
            let count = floor_tol(replications as f64 * mass) as u64;
            match (count, policy) {
                (0, FloorPolicy::Strict) => Err(NestorError::ScheduleInfeasible {
                    level: n as usize,
                    replications,
                    mass,
                }),
                (0, FloorPolicy::ClampToOne) => Ok(1),
                (c, _) => Ok(c),
            }
        })
        .collect()
}

/// Per-stage parameter bundle of the classical estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSchedule {
    pub stage: u32,
    pub delta: f64,
    pub lipschitz: f64,
    pub eps: f64,
    pub rate: f64,
    pub rho: f64,
    pub truncation: u32,
    pub replications: u64,
    pub per_level: Vec<u64>,
    pub p: f64,
}

impl LevelSchedule {
    pub fn new(
        d: u32,
        delta: f64,
        lipschitz: f64,
        eps: f64,
        domain: EpsDomain,
        policy: FloorPolicy,
    ) -> Result<Self> {
        let (rate, rho) = solve_rate(d, delta)?;
        let truncation = truncation_level_in(lipschitz, eps, domain)?;
        let replications = replication_count_in(d, delta, lipschitz, eps, domain)?;
        let dist = LevelDistribution::truncated(rate, truncation)?;
        let per_level = per_level_counts_with(replications, &dist, policy)?;
        Ok(LevelSchedule {
            stage: d,
            delta,
            lipschitz,
            eps,
            rate,
            rho,
            truncation,
            replications,
            per_level,
            p: moment_order(d, delta),
        })
    }

    pub fn distribution(&self) -> LevelDistribution {
        LevelDistribution::Truncated {
            rate: self.rate,
            truncation: self.truncation,
        }
    }
}
