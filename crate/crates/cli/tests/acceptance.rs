//! Acceptance gate. Runs every criterion at full reference size and prints
//! one PASS/FAIL line per criterion; exits nonzero if any criterion fails.
//!
//! Runs as a plain binary (`harness = false`) so the verdict lines are always
//! printed. Expect several minutes on a single core.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use fkvx::{CommonArgs, RunArgs, RunOutcome};
use fkvx_core::exponent::{verify_class_s, ExponentFunction, Hypothesis, SamplingPlan};
use fkvx_core::mc::{estimate_u, McConfig};
use fkvx_core::sde::{default_feller_probes, feller_functional, feller_test, Bump};
use fkvx_core::validation::{
    convergence_study, generator_limit_study, masked_max_error, window_mask, ConvergenceReference,
    DEFAULT_BOUNDARY_LAYER, DEFAULT_SEED,
};
use fkvx_core::{solve_pde, CaseId, ClassSCertificate, LogGrid, ModelSpec, ScalarFn, SolveOptions};

struct Verdict {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: u8, name: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict {
        id,
        name,
        pass,
        detail,
    }
}

fn reference_run(case: CaseId, threads: usize, dir: &Path, check_oracle: bool) -> RunOutcome {
    let started = Instant::now();
    eprintln!("  running {case} reference at {threads} thread(s) ...");
    let args = RunArgs {
        common: CommonArgs {
            case: Some(case.label().to_string()),
            config: None,
            seed: Some(DEFAULT_SEED),
            n_x: None,
            n_t: None,
            n_paths: None,
            n_steps: None,
            threads: Some(threads),
        },
        output_dir: Some(dir.to_path_buf()),
        interior_trim: None,
        snapshot_stride: None,
        check_oracle,
        max_error: None,
    };
    let outcome = fkvx::run(&args).unwrap_or_else(|e| panic!("{case} run failed: {e}"));
    eprintln!("  {case} done in {:.1} s", started.elapsed().as_secs_f64());
    outcome
}

const U_MAX: f64 = 0.990_049_833_749_168; // e^{−0.01} = sup f on [0.1, 50]

fn criterion_1(runs: &[(CaseId, &RunOutcome)]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (case, run) in runs {
        let r = &run.report;
        let window = masked_max_error(
            &r.u_pde,
            &r.mc.iter().map(|e| e.mean).collect::<Vec<_>>(),
            &window_mask(&r.grid, DEFAULT_BOUNDARY_LAYER),
        );
        let secs = r.runtimes.pde.as_secs_f64() + r.runtimes.monte_carlo.as_secs_f64();
        pass &= r.max_abs_error <= 1e-3;
        parts.push(format!(
            "{case}: all {:.3e} / trim-5 {:.3e} / y-window {:.3e} ({secs:.0} s)",
            r.max_abs_error, r.max_abs_error_interior, window
        ));
    }
    verdict(1, "PDE vs MC max error <= 1e-3", pass, parts.join("; "))
}

fn criterion_2(run: &RunOutcome) -> Verdict {
    let o = run.oracle.as_ref().expect("oracle enabled for case3");
    let r = &run.report;
    let trim = r.settings.interior_trim;
    let n = r.u_pde.len();
    let trimmed = masked_max_error(
        &r.u_pde,
        &o.oracle,
        &(0..n)
            .map(|i| i >= trim && i < n - trim)
            .collect::<Vec<_>>(),
    );
    verdict(
        2,
        "GBM oracle equivalence",
        o.pde_pass && o.mc_pass,
        format!(
            "PDE y-window {:.3e} (trim-5 {:.3e}, all {:.3e}); MC worst |err|/3(se+bias) = {:.3} with bias {:.2e}",
            o.pde_window_error, trimmed, o.pde_max_error, o.mc_worst_ratio, o.calibration.allowance
        ),
    )
}

fn criterion_3(runs: &[(CaseId, &RunOutcome)]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (case, run) in runs {
        let r = &run.report;
        let pde_ok = r.pde_min >= -1e-12 && r.pde_max <= U_MAX + 1e-12;
        let mc_ok = r.mc.iter().all(|e| e.mean > 0.0 && e.mean <= U_MAX);
        pass &= pde_ok && mc_ok;
        let (lo, hi) = r.mc.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| {
            (lo.min(e.mean), hi.max(e.mean))
        });
        parts.push(format!(
            "{case}: PDE [{:.3e}, {:.6}] MC [{lo:.3e}, {hi:.6}]",
            r.pde_min, r.pde_max
        ));
    }
    verdict(3, "max principle", pass, parts.join("; "))
}

fn criterion_4() -> Verdict {
    let mut spec = ModelSpec::reference(CaseId::Case1);
    spec.payoff = ScalarFn::constant(1.0);
    spec.potential = ScalarFn::constant(0.1);
    let grid = LogGrid::for_spec(&spec, 400).unwrap();
    let sol = solve_pde(&spec, &grid, 400, &SolveOptions::default()).unwrap();
    let dt = 1.0f64 / 400.0;
    let factor = ((1.0 - 0.1 * dt / 2.0) / (1.0 + 0.1 * dt / 2.0)).powi(400);
    let pde_err = sol
        .final_values()
        .iter()
        .map(|v| (v - factor).abs())
        .fold(0.0, f64::max);

    let points: Vec<f64> = grid.nodes_x.iter().step_by(10).copied().collect();
    let mc = estimate_u(&spec, &points, &McConfig::reference(DEFAULT_SEED)).unwrap();
    let target = (-0.1f64).exp();
    let mc_err = mc
        .iter()
        .map(|e| (e.mean - target).abs())
        .fold(0.0, f64::max);
    let se_zero = mc.iter().all(|e| e.std_error == 0.0);
    verdict(
        4,
        "constant-solution exactness",
        pde_err <= 1e-13 && mc_err <= 1e-14 && se_zero,
        format!(
            "PDE max |v - r^400| = {pde_err:.2e}; MC max |u - e^-0.1| = {mc_err:.2e} over {} nodes, std_error all zero: {se_zero}",
            points.len()
        ),
    )
}

fn criterion_5() -> Verdict {
    let spec = ModelSpec::reference(CaseId::Case3);
    let levels = [(200, 200), (400, 400), (800, 800)];
    let table = convergence_study(
        &spec,
        &levels,
        ConvergenceReference::Gbm,
        DEFAULT_BOUNDARY_LAYER,
    )
    .unwrap();
    let in_range = table
        .orders
        .iter()
        .filter(|o| o.is_some_and(|o| (1.7..=2.3).contains(&o)))
        .count();
    let errors: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("{:.3e}", r.error))
        .collect();
    let orders: Vec<String> = table
        .orders
        .iter()
        .map(|o| o.map_or("undefined".into(), |o| format!("{o:.3}")))
        .collect();

    let case1 = convergence_study(
        &ModelSpec::reference(CaseId::Case1),
        &levels,
        ConvergenceReference::FineGrid {
            n_x: 1600,
            n_t: 1600,
        },
        DEFAULT_BOUNDARY_LAYER,
    )
    .unwrap();
    let case1_orders: Vec<String> = case1
        .orders
        .iter()
        .map(|o| o.map_or("undefined".into(), |o| format!("{o:.3}")))
        .collect();
    verdict(
        5,
        "Crank-Nicolson order 2",
        in_range >= 2,
        format!(
            "case3 errors [{}], orders [{}]; case1 vs 1600-node reference orders [{}]",
            errors.join(", "),
            orders.join(", "),
            case1_orders.join(", ")
        ),
    )
}

fn criterion_6(runs: &[(CaseId, &RunOutcome)]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (case, run) in runs {
        match &run.report.moment_bound {
            Some(m) => {
                pass &= m.pass && m.n_paths == 20_000;
                parts.push(format!(
                    "{case}: {:.4} <= {:.4} (K = {})",
                    m.empirical, m.theoretical, m.k
                ));
            }
            None => {
                pass = false;
                parts.push(format!("{case}: not computed"));
            }
        }
    }
    verdict(6, "moment bound", pass, parts.join("; "))
}

fn criterion_7() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for case in CaseId::ALL {
        let r = feller_test(&ModelSpec::reference(case), &default_feller_probes()).unwrap();
        pass &= r.tail_min >= -1e-8;
        parts.push(format!("{case} liminf ~ {:.3e}", r.tail_min));
    }
    let gbm = ModelSpec::reference(CaseId::Case3);
    let closed = default_feller_probes()
        .iter()
        .map(|&x| (feller_functional(&gbm, x) - (0.1 - 0.04) * x).abs())
        .fold(0.0, f64::max);
    pass &= closed <= 1e-14;
    parts.push(format!("case3 closed form max deviation {closed:.1e}"));
    verdict(7, "Feller classification", pass, parts.join("; "))
}

fn criterion_8() -> Verdict {
    let spec = ModelSpec::reference(CaseId::Case1);
    let bump = Bump {
        center: 2.0,
        half_width: 1.0,
    };
    let study = generator_limit_study(
        &spec,
        bump,
        2.0,
        &[0.04, 0.02, 0.01],
        100_000,
        20,
        DEFAULT_SEED,
    )
    .unwrap();
    let rows: Vec<String> = study
        .rows
        .iter()
        .map(|r| format!("h={}: {:.5} ± {:.1e}", r.h, r.quotient, r.std_error))
        .collect();
    verdict(
        8,
        "generator limit",
        study.monotone_within(2.0),
        format!("Lg(2) = {:.5}; {}", study.generator, rows.join(", ")),
    )
}

fn criterion_9() -> Verdict {
    let cert = ClassSCertificate {
        h_minus: 1.0,
        h_plus: 1.5,
        delta: 1.0,
        m0: 0.6,
        c0: 2.0,
        alpha: 0.6,
        m_inf: 0.1,
        r_inf: 1.0,
    };
    let plan = SamplingPlan::default();
    let good = verify_class_s(
        &ExponentFunction::exponential_decay(0.5).with_certificate(cert),
        &plan,
    )
    .unwrap();
    let broken = verify_class_s(
        &ExponentFunction::exponential_decay(0.5)
            .with_certificate(ClassSCertificate { alpha: 0.1, ..cert }),
        &plan,
    )
    .unwrap();
    let failed = broken.failed_hypotheses();
    verdict(
        9,
        "class-S verification",
        good.passed() && failed == vec![Hypothesis::H3],
        format!(
            "1 + 0.5e^-x passes: {}; alpha = 0.1 fails {:?}",
            good.passed(),
            failed.iter().map(|h| h.to_string()).collect::<Vec<_>>()
        ),
    )
}

fn criterion_10(a: &Path, b: &Path, threads: usize) -> Verdict {
    let (ca, cb) = (
        fs::read(a.join("solution.csv")).unwrap(),
        fs::read(b.join("solution.csv")).unwrap(),
    );
    verdict(
        10,
        "determinism across thread counts",
        ca == cb && !ca.is_empty(),
        format!(
            "solution.csv at 1 and {threads} threads: {} bytes, identical: {}",
            ca.len(),
            ca == cb
        ),
    )
}

fn main() -> ExitCode {
    // `cargo test -- <filter>` style arguments are accepted and ignored;
    // `--list` reports a single entry so test discovery tools stay happy.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let started = Instant::now();
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = |name: &str| tmp.path().join(name);

    let mut verdicts = vec![
        criterion_4(),
        criterion_5(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ];

    let case1 = reference_run(CaseId::Case1, 1, &dir("case1-t1"), false);
    let threads = 4;
    let _case1_again = reference_run(CaseId::Case1, threads, &dir("case1-tn"), false);
    let case2 = reference_run(CaseId::Case2, 1, &dir("case2"), false);
    let case3 = reference_run(CaseId::Case3, 1, &dir("case3"), true);
    let runs = [
        (CaseId::Case1, &case1),
        (CaseId::Case2, &case2),
        (CaseId::Case3, &case3),
    ];

    verdicts.push(criterion_1(&runs));
    verdicts.push(criterion_2(&case3));
    verdicts.push(criterion_3(&runs));
    verdicts.push(criterion_6(&runs));
    verdicts.push(criterion_10(&dir("case1-t1"), &dir("case1-tn"), threads));
    verdicts.sort_by_key(|v| v.id);

    println!();
    for v in &verdicts {
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status}  {}: {}", v.id, v.name, v.detail);
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.0} s)",
        verdicts.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
