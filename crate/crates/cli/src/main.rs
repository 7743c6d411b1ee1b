//! `nestor`: run convergence studies, fit slopes, draw charts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nestor::bench::config::{ExperimentConfig, PartialConfig};
use nestor::bench::plot::{emit_plot, PlotKind};
use nestor::bench::slope::fit_slope;
use nestor::bench::study::{read_csv, run_and_write, CSV_COLUMNS};

#[derive(Parser)]
#[command(
    name = "nestor",
    version,
    about = "Error and cost studies for nested-expectation estimators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicate an estimator over an eps grid and write `<problem>_<estimator>.csv`.
    Run(RunArgs),
    /// Fit the log-log slope of a CSV column against 1/eps.
    Slope(SlopeArgs),
    /// Draw an SVG chart from a study CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with an [experiment] table and an optional [problem] table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// identity-chain, gauss-rne-D1, gauss-rne-D2, gauss-rne-D3 or gauss-optstop-D2.
    #[arg(long)]
    problem: Option<String>,
    /// alg1, alg2-geo, alg2-trunc, alg3, alg4 or alg6.
    #[arg(long)]
    estimator: Option<String>,
    /// Strictly decreasing accuracies in (0, 1).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Independent replications per accuracy.
    #[arg(long)]
    reps: Option<u64>,
    /// Master seed; results depend on it and nothing else.
    #[arg(long)]
    seed: Option<u64>,
    /// Moment slack in (0, 1/2] that sets the level distributions.
    #[arg(long)]
    delta: Option<f64>,
    /// Constant in the quantum mean-estimation charge.
    #[arg(long)]
    kappa: Option<f64>,
    /// Worker threads; output is identical for any value.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run cells whose estimated cost exceeds the guardrail.
    #[arg(long)]
    allow_expensive: bool,
}

#[derive(Args)]
struct SlopeArgs {
    /// Study CSV written by `nestor run`.
    #[arg(long)]
    csv: PathBuf,
    /// Column to fit against eps.
    #[arg(long, default_value = "classical_steps_mean")]
    cost_col: String,
    /// Divide the column by log2(1/eps)^k before fitting.
    #[arg(long, default_value_t = 0)]
    log_power: i32,
}

#[derive(Args)]
struct PlotArgs {
    /// Study CSV written by `nestor run`.
    #[arg(long)]
    csv: PathBuf,
    /// rmse_vs_eps or cost_vs_eps.
    #[arg(long)]
    kind: String,
    /// SVG file to write.
    #[arg(long)]
    out: PathBuf,
}

fn run(args: RunArgs) -> nestor::Result<()> {
    let file = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => PartialConfig::default(),
    };
    let flags = PartialConfig {
        problem_id: args.problem,
        estimator: args.estimator,
        eps_grid: args.eps,
        reps: args.reps,
        delta: args.delta,
        seed: args.seed,
        kappa: args.kappa,
        output_dir: args.out,
        allow_expensive: args.allow_expensive.then_some(true),
        threads: args.threads,
        ..Default::default()
    };
    let config = file.overlay(flags).resolve()?;
    let (rows, path) = run_and_write(&config)?;
    println!("{}", CSV_COLUMNS.join("\t"));
    for r in &rows {
        println!(
            "{}\t{:.4e}\t{:+.4e}\t{:.4e}\t{:.4e}\t{}\t{}",
            r.eps,
            r.empirical_rmse,
            r.empirical_bias,
            r.classical_steps_mean,
            r.quantum_charged,
            r.reps,
            r.seed
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn slope(args: SlopeArgs) -> nestor::Result<()> {
    let rows = read_csv(&args.csv)?;
    let fit = fit_slope(&rows, &args.cost_col, args.log_power)?;
    println!("slope {:.6}", fit.slope);
    println!("r_squared {:.6}", fit.r_squared);
    Ok(())
}

fn plot(args: PlotArgs) -> nestor::Result<()> {
    let kind: PlotKind = args.kind.parse()?;
    let rows = read_csv(&args.csv)?;
    emit_plot(&rows, kind, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with 2 on its own usage errors
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Slope(a) => slope(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, nestor::NestorError::Guardrail { .. }) {
                eprintln!("hint: --allow-expensive runs it anyway");
            }
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
