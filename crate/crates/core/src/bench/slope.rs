//! Log-log slope fits of cost or error against `1/ε`.

use serde::{Deserialize, Serialize};

use super::study::{ConvergenceRow, CSV_COLUMNS};
use crate::error::{NestorError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares slope of `log2(cost / log2(1/ε)^power)` against
/// `log2(1/ε)`. A cost that grows like `ε^{-k}` fits to slope `k`.
pub fn fit_slope(
    rows: &[ConvergenceRow],
    cost_column: &str,
    log_correction_power: i32,
) -> Result<SlopeFit> {
    if !CSV_COLUMNS.contains(&cost_column) {
        return Err(NestorError::UnknownColumn(cost_column.to_string()));
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let values: Vec<f64> = rows
        .iter()
        .map(|r| r.column(cost_column).unwrap_or(f64::NAN))
        .collect();
    fit_log_log(&eps, &values, log_correction_power)
}

/// The same fit on bare arrays.
pub fn fit_log_log(eps: &[f64], values: &[f64], log_correction_power: i32) -> Result<SlopeFit> {
    if eps.len() != values.len() {
        return Err(NestorError::parameter(
            "values",
            format!("{} eps values but {} costs", eps.len(), values.len()),
        ));
    }
    if eps.len() < 3 {
        return Err(NestorError::InsufficientData {
            needed: 3,
            got: eps.len(),
        });
    }
    let mut xs = Vec::with_capacity(eps.len());
    let mut ys = Vec::with_capacity(eps.len());
    for (&e, &v) in eps.iter().zip(values) {
        if !(e > 0.0 && e < 1.0) {
            return Err(NestorError::parameter(
                "eps",
                format!("{e} is outside (0, 1)"),
            ));
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(NestorError::parameter(
                "cost",
                format!("log-log fit needs positive values, got {v}"),
            ));
        }
        let x = (1.0 / e).log2();
        xs.push(x);
        ys.push(v.log2() - log_correction_power as f64 * x.log2());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(NestorError::parameter("eps", "all eps values are equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let r_squared = if ss_tot <= f64::EPSILON * ys.len() as f64 * my.abs().max(1.0) {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
    })
}
