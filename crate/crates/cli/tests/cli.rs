use std::fs;
use std::path::Path;
use std::process::Command;

use fkvx::output::read_solution_csv;

fn fkvx(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fkvx"))
        .args(args)
        .env_remove("FKVX_SEED")
        .output()
        .expect("binary runs")
}

fn small_run(dir: &Path, extra: &[&str]) -> std::process::Output {
    let mut args = vec![
        "run",
        "--n-x",
        "60",
        "--n-t",
        "60",
        "--n-paths",
        "200",
        "--n-steps",
        "50",
        "--output-dir",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    fkvx(&args)
}

#[test]
fn writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small_run(tmp.path(), &["--case", "case2"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["solution.csv", "report.txt", "comparison.svg", "error.svg"] {
        assert!(tmp.path().join(name).is_file(), "{name}");
    }
    assert!(!tmp.path().join("oracle.csv").exists());
    let report = fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert!(report.contains("case: case2"));
    assert!(report.contains("master_seed = "));
    assert_eq!(
        read_solution_csv(&tmp.path().join("solution.csv"))
            .unwrap()
            .len(),
        60
    );
}

#[test]
fn solution_csv_is_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(small_run(a.path(), &["--threads", "1", "--seed", "7"])
        .status
        .success());
    assert!(small_run(b.path(), &["--threads", "3", "--seed", "7"])
        .status
        .success());
    let (ca, cb) = (
        fs::read(a.path().join("solution.csv")).unwrap(),
        fs::read(b.path().join("solution.csv")).unwrap(),
    );
    assert_eq!(ca, cb);
    let c = tempfile::tempdir().unwrap();
    assert!(small_run(c.path(), &["--seed", "8"]).status.success());
    assert_ne!(ca, fs::read(c.path().join("solution.csv")).unwrap());
}

#[test]
fn seed_from_environment() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(small_run(a.path(), &["--seed", "99"]).status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_fkvx"))
        .args([
            "run",
            "--n-x",
            "60",
            "--n-t",
            "60",
            "--n-paths",
            "200",
            "--n-steps",
            "50",
            "--output-dir",
        ])
        .arg(b.path())
        .env("FKVX_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(a.path().join("solution.csv")).unwrap(),
        fs::read(b.path().join("solution.csv")).unwrap()
    );
}

#[test]
fn csv_round_trips_every_value() {
    let tmp = tempfile::tempdir().unwrap();
    let args = fkvx::RunArgs {
        common: fkvx::CommonArgs {
            case: Some("case1".into()),
            config: None,
            seed: Some(3),
            n_x: Some(40),
            n_t: Some(40),
            n_paths: Some(100),
            n_steps: Some(40),
            threads: None,
        },
        output_dir: Some(tmp.path().to_path_buf()),
        interior_trim: None,
        snapshot_stride: None,
        check_oracle: false,
        max_error: None,
    };
    let outcome = fkvx::run(&args).unwrap();
    let rows = read_solution_csv(&tmp.path().join("solution.csv")).unwrap();
    let r = &outcome.report;
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0].to_bits(), r.x()[i].to_bits());
        assert_eq!(row[1].to_bits(), r.u_pde[i].to_bits());
        assert_eq!(row[2].to_bits(), r.mc[i].mean.to_bits());
        assert_eq!(row[3].to_bits(), r.mc[i].std_error.to_bits());
        assert_eq!(row[4].to_bits(), r.pointwise_error[i].to_bits());
    }
}

#[test]
fn constant_payoff_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("custom.toml");
    fs::write(&cfg, "[physical]\nf = \"1\"\nV = \"0.1\"\n").unwrap();
    let out = small_run(tmp.path(), &["--config", cfg.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = read_solution_csv(&tmp.path().join("solution.csv")).unwrap();
    let dt = 1.0f64 / 60.0;
    let cn = ((1.0 - 0.05 * dt) / (1.0 + 0.05 * dt)).powi(60);
    for row in rows {
        assert!((row[1] - cn).abs() <= 1e-13);
        assert!((row[2] - (-0.1f64).exp()).abs() <= 1e-15);
        assert_eq!(row[3], 0.0);
    }
}

#[test]
fn oracle_check_writes_oracle_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fkvx(&[
        "run",
        "--case",
        "case3",
        "--check-oracle",
        "--n-x",
        "200",
        "--n-t",
        "200",
        "--n-paths",
        "200",
        "--n-steps",
        "50",
        "--output-dir",
        tmp.path().to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("PASS  oracle agreement (PDE)"));
    let text = fs::read_to_string(tmp.path().join("oracle.csv")).unwrap();
    assert!(text.starts_with("x,u_oracle,u_pde"));
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn oracle_check_rejects_variable_exponents() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small_run(tmp.path(), &["--case", "case1", "--check-oracle"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle"));
}

#[test]
fn max_error_gate_sets_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small_run(tmp.path(), &["--max-error", "1e-12"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL  max error"));
}

#[test]
fn config_errors_exit_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[discretization]\nn_x = 100\nn_paths = \"many\"\n").unwrap();
    let out = small_run(tmp.path(), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("n_paths"), "{err}");

    let out = small_run(tmp.path(), &["--case", "case9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("case9"));

    fs::write(&cfg, "[physical]\nV = \"-1\"\n").unwrap();
    let out = small_run(tmp.path(), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_case2_passes() {
    let out = fkvx(&[
        "verify",
        "--case",
        "case2",
        "--n-paths",
        "2000",
        "--n-steps",
        "100",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert!(stdout.contains("PASS  p h3"));
    assert!(stdout.contains("PASS  moment bound"));
}

#[test]
fn verify_reports_h2_for_constant_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("h2.toml");
    fs::write(
        &cfg,
        "[exponents]\np = \"2\"\np_certificate = { h_minus = 1, h_plus = 2, delta = 1, m0 = 1, c0 = 1, alpha = 1.5, m_inf = 1, r_inf = 1 }\n",
    )
    .unwrap();
    let out = fkvx(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--n-paths",
        "200",
        "--n-steps",
        "20",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(1), "{stdout}");
    assert!(
        stdout.lines().any(|l| l.starts_with("FAIL  p h2")),
        "{stdout}"
    );
    assert!(
        !stdout.lines().any(|l| l.starts_with("FAIL  q")),
        "{stdout}"
    );
}

#[test]
fn verify_without_certificate_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("nocert.toml");
    fs::write(&cfg, "[exponents]\nq = \"1 + 0.1*exp(-x)\"\n").unwrap();
    let out = fkvx(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--n-paths",
        "200",
        "--n-steps",
        "20",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout.contains("CERTIFICATE_REQUIRED"), "{stdout}");
}
