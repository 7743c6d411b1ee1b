//! Convergence studies: replicate an estimator over an ε grid and summarize
//! error and cost per grid point.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, GUARDRAIL_STEPS};
use crate::classical::{derand_estimate, rmlmc_estimate, single_sample_mean, LevelKind};
use crate::cost::{
    estimated_classical_cost, qmlmc_truncation, single_sample_runs, DirectQuantParams,
};
use crate::error::{NestorError, Result};
use crate::ledger::CostLedger;
use crate::problem::{ground_truth, EstimateReport, EstimatorMode, History, NestedProblem};
use crate::problems::problem_by_id;
use crate::qamc::{rmse_samples, QamcConfig};
use crate::quantum::{direct_quantized_estimate, qmlmc_estimate};
use crate::rng::RandomStream;
use crate::schedule::{moment_order, replication_count, solve_rate, truncation_level};

pub const CSV_COLUMNS: [&str; 7] = [
    "eps",
    "empirical_rmse",
    "empirical_bias",
    "classical_steps_mean",
    "quantum_charged",
    "reps",
    "seed",
];

/// One grid point of a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub empirical_rmse: f64,
    pub empirical_bias: f64,
    pub classical_steps_mean: f64,
    pub quantum_charged: f64,
    pub reps: u64,
    pub seed: u64,
}

impl ConvergenceRow {
    pub fn column(&self, name: &str) -> Option<f64> {
        match name {
            "eps" => Some(self.eps),
            "empirical_rmse" => Some(self.empirical_rmse),
            "empirical_bias" => Some(self.empirical_bias),
            "classical_steps_mean" => Some(self.classical_steps_mean),
            "quantum_charged" => Some(self.quantum_charged),
            "reps" => Some(self.reps as f64),
            "seed" => Some(self.seed as f64),
            _ => None,
        }
    }
}

/// Runs one estimator call of the given mode from the empty history.
pub fn run_estimator(
    problem: &dyn NestedProblem,
    mode: EstimatorMode,
    eps: f64,
    delta: f64,
    qamc: &QamcConfig,
    rng: &mut RandomStream,
) -> Result<EstimateReport> {
    let mut history = History::with_capacity(problem.horizon());
    let mut ledger = CostLedger::new();
    match mode {
        EstimatorMode::Single => {
            single_sample_mean(problem, 0, &mut history, eps, delta, rng, &mut ledger)
        }
        EstimatorMode::BatchedGeometric => rmlmc_estimate(
            problem,
            0,
            &mut history,
            eps,
            LevelKind::Geometric,
            delta,
            rng,
            &mut ledger,
        ),
        EstimatorMode::BatchedTruncated => rmlmc_estimate(
            problem,
            0,
            &mut history,
            eps,
            LevelKind::Truncated,
            delta,
            rng,
            &mut ledger,
        ),
        EstimatorMode::Derandomized => {
            derand_estimate(problem, 0, &mut history, eps, delta, rng, &mut ledger)
        }
        EstimatorMode::DirectQuantized => direct_quantized_estimate(
            problem,
            0,
            &mut history,
            eps,
            &DirectQuantParams::default(),
            qamc,
            rng,
            &mut ledger,
        ),
        EstimatorMode::QuantumMlmc => {
            qmlmc_estimate(problem, 0, &mut history, eps, qamc, rng, &mut ledger)
        }
    }
}

/// Refuses calls whose cost pre-pass exceeds the desk-scale limit.
pub fn check_guardrail(
    problem: &dyn NestedProblem,
    mode: EstimatorMode,
    eps: f64,
    delta: f64,
    qamc: &QamcConfig,
) -> Result<f64> {
    let estimated = estimated_classical_cost(problem, mode, eps, delta, qamc)?;
    if estimated > GUARDRAIL_STEPS {
        return Err(NestorError::Guardrail {
            eps,
            estimated,
            limit: GUARDRAIL_STEPS,
        });
    }
    Ok(estimated)
}

/// Stream index of replication `rep` at grid point `cell`.
pub fn stream_index(cell: usize, rep: u64) -> u64 {
    ((cell as u64) << 32) | (rep & 0xffff_ffff)
}

#[cfg(feature = "parallel")]
fn map_reps<F>(reps: u64, threads: Option<usize>, f: F) -> Result<Vec<EstimateReport>>
where
    F: Fn(u64) -> Result<EstimateReport> + Sync + Send,
{
    use rayon::prelude::*;
    let run = || {
        (0..reps)
            .into_par_iter()
            .map(&f)
            .collect::<Result<Vec<_>>>()
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| NestorError::Config(e.to_string()))?
            .install(run),
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_reps<F>(reps: u64, _threads: Option<usize>, f: F) -> Result<Vec<EstimateReport>>
where
    F: Fn(u64) -> Result<EstimateReport>,
{
    (0..reps).map(f).collect()
}

/// All replications at one grid point plus their summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub row: ConvergenceRow,
    pub truth: f64,
    pub reports: Vec<EstimateReport>,
}

pub fn summarize(eps: f64, truth: f64, reports: &[EstimateReport], seed: u64) -> ConvergenceRow {
    let n = reports.len() as f64;
    let mut bias = 0.0;
    let mut mse = 0.0;
    let mut steps = 0.0;
    let mut charged = 0.0;
    for (k, r) in reports.iter().enumerate() {
        let w = 1.0 / (k + 1) as f64;
        let err = r.estimate - truth;
        bias += (err - bias) * w;
        mse += (err * err - mse) * w;
        steps += (r.ledger.classical_steps as f64 - steps) * w;
        charged += (r.ledger.quantum_charged as f64 - charged) * w;
    }
    debug_assert!(n > 0.0);
    ConvergenceRow {
        eps,
        empirical_rmse: mse.sqrt().max(bias.abs()),
        empirical_bias: bias,
        classical_steps_mean: steps,
        quantum_charged: charged,
        reps: reports.len() as u64,
        seed,
    }
}

pub fn run_cell(
    problem: &dyn NestedProblem,
    config: &ExperimentConfig,
    cell: usize,
    eps: f64,
    truth: f64,
) -> Result<CellResult> {
    let qamc = config.qamc()?;
    if !config.allow_expensive {
        check_guardrail(problem, config.estimator, eps, config.delta, &qamc)?;
    }
    let reports = map_reps(config.reps, config.threads, |rep| {
        let mut rng = RandomStream::for_replication(config.seed, stream_index(cell, rep));
        run_estimator(
            problem,
            config.estimator,
            eps,
            config.delta,
            &qamc,
            &mut rng,
        )
    })?;
    Ok(CellResult {
        row: summarize(eps, truth, &reports, config.seed),
        truth,
        reports,
    })
}

/// Reference value of the study's target: analytic when known, else the
/// fanout-gated oracle at a tolerance of the smallest ε.
pub fn study_truth(problem: &dyn NestedProblem, config: &ExperimentConfig) -> Result<f64> {
    let tolerance = config
        .eps_grid
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut rng = RandomStream::for_replication(config.seed, u64::MAX);
    ground_truth(problem, &History::new(), tolerance, &mut rng)
}

/// Full study with every replication kept.
pub fn run_study_detailed(config: &ExperimentConfig) -> Result<Vec<CellResult>> {
    config.validate()?;
    let problem = problem_by_id(&config.problem_id, &config.problem)?;
    let truth = study_truth(problem.as_ref(), config)?;
    config
        .eps_grid
        .iter()
        .enumerate()
        .map(|(cell, &eps)| run_cell(problem.as_ref(), config, cell, eps, truth))
        .collect()
}

/// One row per ε, in grid order; deterministic given the seed.
pub fn run_study(config: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    Ok(run_study_detailed(config)?
        .into_iter()
        .map(|c| c.row)
        .collect())
}

/// 17 significant digits: enough to round-trip every `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> NestorError + '_ {
    move |source| NestorError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_rows<W: Write>(rows: &[ConvergenceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            format_float(r.eps),
            format_float(r.empirical_rmse),
            format_float(r.empirical_bias),
            format_float(r.classical_steps_mean),
            format_float(r.quantum_charged),
            r.reps.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| NestorError::Csv(e.into()))?;
    Ok(())
}

pub fn write_csv(rows: &[ConvergenceRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_rows(rows, file)
}

pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<ConvergenceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(NestorError::Config(format!(
            "unexpected CSV header `{}`; expected `{}`",
            header.iter().collect::<Vec<_>>().join(","),
            CSV_COLUMNS.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ConvergenceRow>> {
    let file = File::open(path).map_err(io_err(path))?;
    read_rows(file)
}

/// Schedule parameters at stage 0 for each grid point, written next to the
/// study CSV so a run can be reproduced from its output alone.
pub fn write_schedule<W: Write>(
    problem: &dyn NestedProblem,
    config: &ExperimentConfig,
    out: W,
) -> Result<()> {
    let qamc = config.qamc()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "eps",
        "estimator",
        "truncation",
        "replications",
        "rate",
        "rho",
        "p",
        "charged_per_estimate",
        "classical_per_estimate",
    ])?;
    let l = problem.lipschitz(0);
    let d = config.delta;
    let (rate, rho) = solve_rate(0, d)?;
    for &eps in &config.eps_grid {
        let mode = config.estimator;
        let blank = String::new;
        let (truncation, replications, rate, rho, p) = match mode {
            EstimatorMode::Single => (
                blank(),
                single_sample_runs(eps).to_string(),
                format_float(rate),
                format_float(rho),
                format_float(moment_order(0, d)),
            ),
            EstimatorMode::BatchedGeometric => (
                blank(),
                replication_count(0, d, l, eps)?.to_string(),
                format_float(rate),
                format_float(rho),
                format_float(moment_order(0, d)),
            ),
            EstimatorMode::BatchedTruncated | EstimatorMode::Derandomized => (
                truncation_level(l, eps)?.to_string(),
                replication_count(0, d, l, eps)?.to_string(),
                format_float(rate),
                format_float(rho),
                format_float(moment_order(0, d)),
            ),
            EstimatorMode::DirectQuantized => {
                let params = DirectQuantParams::default();
                (
                    params.truncation(problem, 0, eps).to_string(),
                    rmse_samples(params.level_bound(l), eps).to_string(),
                    format_float(params.r),
                    blank(),
                    blank(),
                )
            }
            EstimatorMode::QuantumMlmc => (
                qmlmc_truncation(l, eps).to_string(),
                blank(),
                blank(),
                blank(),
                blank(),
            ),
        };
        let charged = crate::cost::charged_cost(problem, mode, eps, &qamc);
        let classical = estimated_classical_cost(problem, mode, eps, d, &qamc)?;
        w.write_record([
            format_float(eps),
            mode.name().to_string(),
            truncation,
            replications,
            rate,
            rho,
            p,
            charged.to_string(),
            format_float(classical),
        ])?;
    }
    w.flush().map_err(|e| NestorError::Csv(e.into()))?;
    Ok(())
}

/// Paths of a study's CSV and its schedule companion inside the output dir.
pub fn output_paths(config: &ExperimentConfig) -> (PathBuf, PathBuf) {
    let stem = format!("{}_{}", config.problem_id, config.estimator.name());
    (
        config.output_dir.join(format!("{stem}.csv")),
        config.output_dir.join(format!("{stem}.schedule.csv")),
    )
}

/// Runs the study and writes both CSV files; returns the rows.
pub fn run_and_write(config: &ExperimentConfig) -> Result<(Vec<ConvergenceRow>, PathBuf)> {
    let rows = run_study(config)?;
    std::fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;
    let (csv_path, schedule_path) = output_paths(config);
    write_csv(&rows, &csv_path)?;
    let problem = problem_by_id(&config.problem_id, &config.problem)?;
    let file = File::create(&schedule_path).map_err(io_err(&schedule_path))?;
    write_schedule(problem.as_ref(), config, file)?;
    Ok((rows, csv_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny(mode: EstimatorMode) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new("identity-chain", mode);
        cfg.eps_grid = vec![0.5, 0.25];
        cfg.reps = 4;
        cfg.seed = 11;
        // the quantum estimators on a two-stage chain already trip the guardrail
        cfg.problem.horizon = Some(1);
        cfg
    }

    #[test]
    fn identity_chain_derandomized_rmse_is_zero() {
        let rows = run_study(&tiny(EstimatorMode::Derandomized)).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows
            .iter()
            .all(|r| r.empirical_rmse == 0.0 && r.quantum_charged == 0.0));
        assert!(rows[1].classical_steps_mean > rows[0].classical_steps_mean);
    }

    #[test]
    fn every_mode_runs_on_the_identity_chain() {
        for mode in EstimatorMode::ALL {
            let rows = run_study(&tiny(mode)).unwrap();
            assert_eq!(rows.len(), 2, "{mode}");
            assert_eq!(rows[0].quantum_charged > 0.0, mode.is_quantum(), "{mode}");
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![
            ConvergenceRow {
                eps: 0.1,
                empirical_rmse: 1.0 / 3.0,
                empirical_bias: -std::f64::consts::PI * 1e-7,
                classical_steps_mean: 123456789.125,
                quantum_charged: 0.0,
                reps: 200,
                seed: u64::MAX,
            },
            ConvergenceRow {
                eps: 0.05,
                empirical_rmse: f64::MIN_POSITIVE,
                empirical_bias: 0.0,
                classical_steps_mean: 1e300,
                quantum_charged: 17.5,
                reps: 1,
                seed: 0,
            },
        ];
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "eps,empirical_rmse,empirical_bias,classical_steps_mean,quantum_charged,reps,seed\n"
        ));
        assert!(text.contains("1.0000000000000001e-1"));
        assert_eq!(read_rows(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_rows("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn guardrail_refuses_expensive_cells() {
        let mut cfg = ExperimentConfig::new("gauss-rne-D2", EstimatorMode::QuantumMlmc);
        cfg.eps_grid = vec![0.05];
        cfg.reps = 1;
        assert!(matches!(
            run_study(&cfg),
            Err(NestorError::Guardrail { .. })
        ));
    }

    #[test]
    fn stream_indices_do_not_collide() {
        assert_ne!(stream_index(0, 1), stream_index(1, 0));
        assert_eq!(stream_index(2, 5), (2 << 32) | 5);
    }

    proptest! {
        #[test]
        fn float_format_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = format_float(x);
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }

        #[test]
        fn rmse_dominates_bias(errs in proptest::collection::vec(-10.0f64..10.0, 1..50)) {
            let reports: Vec<EstimateReport> = errs.iter().map(|&e| EstimateReport {
                estimate: e,
                target_error: 0.1,
                stage: 0,
                ledger: CostLedger::new(),
                seed: 0,
                replication: 0,
                mode: EstimatorMode::Derandomized,
            }).collect();
            let row = summarize(0.1, 0.0, &reports, 0);
            prop_assert!(row.empirical_rmse >= row.empirical_bias.abs());
        }
    }
}
