use std::path::Path;
use std::process::{Command, Output};

fn nestor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nestor"))
        .args(args)
        .output()
        .unwrap()
}

fn run_identity(dir: &Path, threads: &str) -> Vec<u8> {
    let out = nestor(&[
        "run",
        "--problem",
        "identity-chain",
        "--estimator",
        "alg2-trunc",
        "--eps",
        "0.5,0.25,0.125",
        "--reps",
        "6",
        "--seed",
        "3",
        "--threads",
        threads,
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::read(dir.join("identity-chain_alg2-trunc.csv")).unwrap()
}

#[test]
fn run_slope_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_identity(dir.path(), "1");
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "eps,empirical_rmse,empirical_bias,classical_steps_mean,quantum_charged,reps,seed"
    );
    assert_eq!(lines.count(), 3);
    assert!(dir
        .path()
        .join("identity-chain_alg2-trunc.schedule.csv")
        .exists());

    let csv_path = dir.path().join("identity-chain_alg2-trunc.csv");
    let out = nestor(&[
        "slope",
        "--csv",
        csv_path.to_str().unwrap(),
        "--cost-col",
        "classical_steps_mean",
        "--log-power",
        "0",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let slope: f64 = stdout
        .lines()
        .next()
        .unwrap()
        .strip_prefix("slope ")
        .unwrap()
        .parse()
        .unwrap();
    assert!(slope > 2.0 && slope < 5.0, "{slope}");

    let svg = dir.path().join("cost.svg");
    let out = nestor(&[
        "plot",
        "--csv",
        csv_path.to_str().unwrap(),
        "--kind",
        "cost_vs_eps",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run_identity(a.path(), "1"), run_identity(b.path(), "3"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(
        &cfg,
        format!(
            "[experiment]\nproblem = \"identity-chain\"\nestimator = \"alg3\"\neps_grid = [0.5, 0.25]\nreps = 50\noutput_dir = {:?}\n\n[problem]\nhorizon = 1\npoint = 0.25\n",
            dir.path().to_str().unwrap()
        ),
    )
    .unwrap();
    let out = nestor(&["run", "--config", cfg.to_str().unwrap(), "--reps", "2"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("identity-chain_alg3.csv")).unwrap();
    // exact estimator on a point mass: zero error, two reps per row
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(f[5], "2");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(nestor(&[]).status.code(), Some(2));
    assert_eq!(
        nestor(&["run", "--problem", "nope", "--estimator", "alg3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        nestor(&["run", "--problem", "identity-chain", "--estimator", "alg7"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        nestor(&[
            "run",
            "--problem",
            "identity-chain",
            "--estimator",
            "alg3",
            "--eps",
            "0.1,0.2"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        nestor(&["plot", "--csv", "x.csv", "--kind", "pie", "--out", "x.svg"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        nestor(&["slope", "--csv", "/nonexistent/x.csv"])
            .status
            .code(),
        Some(1)
    );

    let dir = tempfile::tempdir().unwrap();
    let out = nestor(&[
        "run",
        "--problem",
        "gauss-rne-D2",
        "--estimator",
        "alg6",
        "--eps",
        "0.05",
        "--reps",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--allow-expensive"));

    let two = dir.path().join("two.csv");
    std::fs::write(
        &two,
        "eps,empirical_rmse,empirical_bias,classical_steps_mean,quantum_charged,reps,seed\n0.2,0,0,10,0,1,0\n0.1,0,0,40,0,1,0\n",
    )
    .unwrap();
    let out = nestor(&["slope", "--csv", two.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = nestor(&[
        "slope",
        "--csv",
        two.to_str().unwrap(),
        "--cost-col",
        "wall_time",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
