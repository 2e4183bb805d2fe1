//! Command-line front end: `fkvx run` compares the two solvers and writes
//! artifacts, `fkvx verify` runs the hypothesis checks on a configuration.
//!
//! Exit codes: 0 success, 1 a check failed, 2 configuration or I/O error,
//! 3–7 solver failure in the coefficient, PDE, Monte Carlo, oracle or
//! check stage.

pub mod config;
pub mod output;
pub mod plot;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fkvx_core::exponent::{log_space, verify_class_s, SamplingPlan};
use fkvx_core::sde::{
    default_feller_probes, feller_test, linear_growth_constant_for, linear_growth_ratio,
    BoundaryClass,
};
use fkvx_core::validation::{
    moment_bound_check, oracle_check, run_case, ComparisonReport, OracleCheck,
};
use fkvx_core::{Error, ExponentFunction, Stage};
use thiserror::Error as ThisError;

use crate::config::{FileConfig, Overrides, RunConfig};

/// Oracle agreement required of the PDE away from the truncation layers.
pub const ORACLE_PDE_TOLERANCE: f64 = 1e-3;
const CALIBRATION_POINTS: usize = 9;
const MAX_PRINCIPLE_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(
    name = "fkvx",
    version,
    about = "Crank–Nicolson vs Feynman–Kac Monte Carlo for variable-exponent diffusions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve with both methods, compare, and write artifacts.
    Run(RunArgs),
    /// Check the exponent hypotheses, boundary behaviour and moment bound.
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Built-in case: case1, case2 or case3.
    #[arg(long)]
    pub case: Option<String>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed of the random streams.
    #[arg(long, env = "FKVX_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_x: Option<usize>,
    #[arg(long)]
    pub n_t: Option<usize>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub n_steps: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Nodes dropped at each end for the interior error.
    #[arg(long)]
    pub interior_trim: Option<usize>,
    /// Keep every k-th PDE time slice (0 keeps first and last only).
    #[arg(long)]
    pub snapshot_stride: Option<usize>,
    /// Compare against the lognormal quadrature (constant exponents only).
    #[arg(long)]
    pub check_oracle: bool,
    /// Fail unless the interior max error is at most this value.
    #[arg(long)]
    pub max_error: Option<f64>,
}

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("CONFIG_ERROR in {source_name}: {message}")]
    Config {
        source_name: String,
        message: String,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Solver(#[from] Error),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        let e = match self {
            CliError::Solver(e) => e,
            _ => return 2,
        };
        match e.root() {
            Error::Config(_)
            | Error::Parse(_)
            | Error::CertificateRequired { .. }
            | Error::InvalidCertificate { .. } => return 2,
            Error::Coefficient { .. } | Error::InvalidFunction { .. } => return 3,
            _ => {}
        }
        match e {
            Error::Stage { stage, .. } => match stage {
                Stage::Coefficients => 3,
                Stage::Pde => 4,
                Stage::MonteCarlo => 5,
                Stage::Oracle => 6,
                Stage::Checks => 7,
            },
            _ => 3,
        }
    }
}

/// One PASS/FAIL line.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict}  {:<34} {}", self.name, self.detail)
    }
}

fn all_passed(lines: &[CheckLine]) -> bool {
    lines.iter().all(|c| c.passed)
}

fn load(common: &CommonArgs, over: Overrides) -> Result<RunConfig, CliError> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let over = Overrides {
        case: common.case.clone(),
        seed: common.seed,
        n_x: common.n_x,
        n_t: common.n_t,
        n_paths: common.n_paths,
        n_steps: common.n_steps,
        ..over
    };
    config::resolve(file, &over)
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub report: ComparisonReport,
    pub oracle: Option<OracleCheck>,
    pub checks: Vec<CheckLine>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }
}

pub fn run(args: &RunArgs) -> Result<RunOutcome, CliError> {
    let cfg = load(
        &args.common,
        Overrides {
            interior_trim: args.interior_trim,
            snapshot_stride: args.snapshot_stride,
            output_dir: args.output_dir.clone(),
            ..Overrides::default()
        },
    )?;
    let (report, oracle) = with_threads(args.common.threads, || -> Result<_, Error> {
        let report = run_case(&cfg.label, &cfg.spec, &cfg.settings)?;
        let oracle = if args.check_oracle {
            Some(oracle_check(
                &cfg.spec,
                &report,
                ORACLE_PDE_TOLERANCE,
                CALIBRATION_POINTS,
            )?)
        } else {
            None
        };
        Ok((report, oracle))
    })??;

    // With V ≥ 0 the solution stays within [min(0, inf f), max(0, sup f)].
    let (f_lo, f_hi) = report
        .x()
        .iter()
        .map(|&x| cfg.spec.payoff.eval(x))
        .fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let mut checks = vec![CheckLine::new(
        "max principle (PDE)",
        report.pde_min >= f_lo - MAX_PRINCIPLE_TOL && report.pde_max <= f_hi + MAX_PRINCIPLE_TOL,
        format!(
            "range [{:e}, {:e}] within [{f_lo:e}, {f_hi:e}]",
            report.pde_min, report.pde_max
        ),
    )];
    if let Some(o) = &oracle {
        checks.push(CheckLine::new(
            "oracle agreement (PDE)",
            o.pde_pass,
            format!(
                "window max error {:e} <= {ORACLE_PDE_TOLERANCE:e}",
                o.pde_window_error
            ),
        ));
        checks.push(CheckLine::new(
            "oracle agreement (Monte Carlo)",
            o.mc_pass,
            format!(
                "worst |error| / 3(se + bias) = {:.4}, bias allowance {:e}",
                o.mc_worst_ratio, o.calibration.allowance
            ),
        ));
    }
    if let Some(tol) = args.max_error {
        checks.push(CheckLine::new(
            "max error",
            report.max_abs_error_interior <= tol,
            format!(
                "{:e} (trim {}) <= {tol:e}; all nodes {:e}",
                report.max_abs_error_interior, cfg.settings.interior_trim, report.max_abs_error
            ),
        ));
    }

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    output::write_solution_csv(&dir.join("solution.csv"), &report)?;
    output::write_text(
        &dir.join("report.txt"),
        &output::render_report(&report, oracle.as_ref(), &checks),
    )?;
    output::write_text(
        &dir.join("comparison.svg"),
        &output::comparison_svg(&report),
    )?;
    output::write_text(&dir.join("error.svg"), &output::error_svg(&report))?;
    if let Some(o) = &oracle {
        output::write_oracle_csv(&dir.join("oracle.csv"), &report, o)?;
    }

    Ok(RunOutcome {
        config: cfg,
        report,
        oracle,
        checks,
    })
}

#[derive(Debug)]
pub struct VerifyOutcome {
    pub checks: Vec<CheckLine>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }
}

fn exponent_checks(
    which: &str,
    h: &ExponentFunction,
    plan: &SamplingPlan,
    out: &mut Vec<CheckLine>,
) -> Result<(), CliError> {
    match verify_class_s(h, plan) {
        Ok(report) => {
            for c in &report.checks {
                let at = c
                    .worst_x
                    .map(|x| format!(" at x = {x:e}"))
                    .unwrap_or_default();
                out.push(CheckLine::new(
                    format!("{which} {} {}", c.hypothesis, c.clause),
                    c.passed,
                    format!("margin {:e}{at}", c.margin),
                ));
            }
            Ok(())
        }
        Err(e @ (Error::CertificateRequired { .. } | Error::InvalidCertificate { .. })) => {
            out.push(CheckLine::new(
                format!("{which} certificate"),
                false,
                e.to_string(),
            ));
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

pub fn verify(args: &CommonArgs) -> Result<VerifyOutcome, CliError> {
    let cfg = load(args, Overrides::default())?;
    let spec = &cfg.spec;
    let plan = SamplingPlan::default();
    let mut checks = Vec::new();
    exponent_checks("p", &spec.p, &plan, &mut checks)?;
    exponent_checks("q", &spec.q, &plan, &mut checks)?;

    let feller = feller_test(spec, &default_feller_probes())?;
    checks.push(CheckLine::new(
        "feller: zero not attainable",
        feller.classification == BoundaryClass::NonAttainable,
        format!(
            "tail min {:e}, value at 1e-12 {:e}",
            feller.tail_min, feller.limit_estimate
        ),
    ));

    match linear_growth_constant_for(spec) {
        Ok(k) => {
            let xs = log_space(plan.x_min, plan.x_max, plan.n_points);
            for (which, h) in [("p", &spec.p), ("q", &spec.q)] {
                let (ratio, x) = linear_growth_ratio(h, k, &xs);
                checks.push(CheckLine::new(
                    format!("linear growth x^{which} <= K(1+x)"),
                    ratio <= 1.0 + 1e-12,
                    format!("K = {k}, worst ratio {ratio:.6} at x = {x:e}"),
                ));
            }
            let s = &cfg.settings;
            let m = with_threads(args.threads, || {
                moment_bound_check(
                    spec,
                    1.0,
                    s.moment_paths.max(2),
                    s.mc.n_steps,
                    s.mc.master_seed,
                )
            })??;
            checks.push(CheckLine::new(
                "moment bound E[max X^2]",
                m.pass,
                format!(
                    "{:.6} <= {:.6} (x0 = 1, {} paths)",
                    m.empirical, m.theoretical, m.n_paths
                ),
            ));
        }
        Err(e) => checks.push(CheckLine::new(
            "linear growth constant",
            false,
            e.to_string(),
        )),
    }
    Ok(VerifyOutcome { checks })
}

/// Entry point shared by the binary: runs the command, prints a summary,
/// and maps the outcome to an exit code.
pub fn main_with(cli: Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Run(args) => run(args).map(|o| {
            println!(
                "case {}: max |u_PDE - u_MC| = {:e} (interior {:e})",
                o.report.label, o.report.max_abs_error, o.report.max_abs_error_interior
            );
            for c in &o.checks {
                println!("{c}");
            }
            println!("artifacts written to {}", o.config.output_dir.display());
            o.passed()
        }),
        Command::Verify(args) => verify(args).map(|o| {
            for c in &o.checks {
                println!("{c}");
            }
            o.passed()
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
