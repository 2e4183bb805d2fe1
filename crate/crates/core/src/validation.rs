//! Cross-validation of the two solvers and the executable hypothesis checks.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::error::{Error, Result, Stage};
use crate::exponent::CaseId;
use crate::mc::{estimate_u, estimate_u_coupled, McConfig, McEstimate};
use crate::model::{ModelSpec, ScalarFn};
use crate::oracle::GbmOracle;
use crate::pde::{solve_pde, GridSolution, LogGrid, SolveOptions};
use crate::sde::{
    default_feller_probes, feller_test, generator_apply, linear_growth_constant_for,
    simulate_paths, Bump, FellerReport, TestFunction,
};

/// Default seed of the reference runs.
pub const DEFAULT_SEED: u64 = 20_240_917;

/// Nodes dropped at each end for the interior error.
pub const DEFAULT_INTERIOR_TRIM: usize = 5;

/// Log-space distance kept from each truncation boundary when comparing
/// against whole-line references. The Neumann truncation perturbs the
/// solution in a layer of a few diffusion lengths `√(2AT)` next to `log r`
/// and `log R`; one unit of `y` is about five of them for the reference data.
pub const DEFAULT_BOUNDARY_LAYER: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub n_x: usize,
    pub n_t: usize,
    pub mc: McConfig,
    pub interior_trim: usize,
    pub snapshot_stride: usize,
    /// Paths for the moment-bound check; 0 skips it.
    pub moment_paths: usize,
}

impl RunSettings {
    /// 400 nodes, 400 PDE steps, 20,000 paths of 400 steps.
    pub fn reference(master_seed: u64) -> Self {
        Self {
            n_x: 400,
            n_t: 400,
            mc: McConfig::reference(master_seed),
            interior_trim: DEFAULT_INTERIOR_TRIM,
            snapshot_stride: 0,
            moment_paths: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBound {
    pub x0: f64,
    pub k: f64,
    /// Mean over paths of `max_n X_n²` on the simulation grid.
    pub empirical: f64,
    pub theoretical: f64,
    pub pass: bool,
    pub n_paths: usize,
    pub floor_activations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Runtimes {
    pub pde: Duration,
    pub monte_carlo: Duration,
    pub checks: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterEcho {
    pub mu: f64,
    pub sigma: f64,
    pub horizon: f64,
    pub domain: (f64, f64),
    pub p: String,
    pub q: String,
    pub potential: String,
    pub payoff: String,
}

impl ParameterEcho {
    fn of(spec: &ModelSpec) -> Self {
        Self {
            mu: spec.mu,
            sigma: spec.sigma,
            horizon: spec.horizon,
            domain: spec.domain,
            p: spec.p.name().to_string(),
            q: spec.q.name().to_string(),
            potential: spec.potential.label().to_string(),
            payoff: spec.payoff.label().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub label: String,
    pub params: ParameterEcho,
    pub settings: RunSettings,
    pub grid: LogGrid,
    pub u_pde: Vec<f64>,
    pub mc: Vec<McEstimate>,
    /// `|u_PDE(x_i, T) − û(x_i, T)|` at every node.
    pub pointwise_error: Vec<f64>,
    pub max_abs_error: f64,
    /// Max error with `interior_trim` nodes dropped at each end.
    pub max_abs_error_interior: f64,
    pub mean_abs_error: f64,
    pub mc_std_error_max: f64,
    /// PDE extremes over all nodes and time steps.
    pub pde_min: f64,
    pub pde_max: f64,
    pub moment_bound: Option<MomentBound>,
    pub feller: FellerReport,
    pub runtimes: Runtimes,
}

impl ComparisonReport {
    pub fn x(&self) -> &[f64] {
        &self.grid.nodes_x
    }

    /// Human-readable key/value summary.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        let st = &self.settings;
        let _ = writeln!(s, "case: {}", self.label);
        let _ = writeln!(s, "[parameters]");
        let _ = writeln!(s, "mu = {}", p.mu);
        let _ = writeln!(s, "sigma = {}", p.sigma);
        let _ = writeln!(s, "T = {}", p.horizon);
        let _ = writeln!(s, "domain = [{}, {}]", p.domain.0, p.domain.1);
        let _ = writeln!(s, "p(x) = {}", p.p);
        let _ = writeln!(s, "q(x) = {}", p.q);
        let _ = writeln!(s, "V(x) = {}", p.potential);
        let _ = writeln!(s, "f(x) = {}", p.payoff);
        let _ = writeln!(s, "[discretization]");
        let _ = writeln!(s, "n_x = {}", st.n_x);
        let _ = writeln!(s, "n_t = {}", st.n_t);
        let _ = writeln!(s, "dy = {}", self.grid.dy);
        let _ = writeln!(s, "dt = {}", p.horizon / st.n_t as f64);
        let _ = writeln!(s, "n_paths = {}", st.mc.n_paths);
        let _ = writeln!(s, "n_steps = {}", st.mc.n_steps);
        let _ = writeln!(s, "antithetic = {}", st.mc.antithetic);
        let _ = writeln!(s, "master_seed = {}", st.mc.master_seed);
        let _ = writeln!(s, "interior_trim = {}", st.interior_trim);
        let _ = writeln!(s, "[errors]");
        let _ = writeln!(s, "max_abs_error = {:e}", self.max_abs_error);
        let _ = writeln!(
            s,
            "max_abs_error_interior = {:e}",
            self.max_abs_error_interior
        );
        let _ = writeln!(s, "mean_abs_error = {:e}", self.mean_abs_error);
        let _ = writeln!(s, "mc_std_error_max = {:e}", self.mc_std_error_max);
        let worst = argmax(&self.pointwise_error);
        let _ = writeln!(
            s,
            "worst_node = {} (x = {})",
            worst, self.grid.nodes_x[worst]
        );
        let _ = writeln!(s, "[max_principle]");
        let _ = writeln!(s, "pde_min = {:e}", self.pde_min);
        let _ = writeln!(s, "pde_max = {:e}", self.pde_max);
        let mc_lo = self.mc.iter().map(|e| e.mean).fold(f64::INFINITY, f64::min);
        let mc_hi = self
            .mc
            .iter()
            .map(|e| e.mean)
            .fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(s, "mc_mean_min = {mc_lo:e}");
        let _ = writeln!(s, "mc_mean_max = {mc_hi:e}");
        let floors: usize = self.mc.iter().map(|e| e.floor_activations).sum();
        let _ = writeln!(s, "floor_activations = {floors}");
        let _ = writeln!(s, "[moment_bound]");
        match &self.moment_bound {
            Some(m) => {
                let _ = writeln!(s, "x0 = {}", m.x0);
                let _ = writeln!(s, "K = {}", m.k);
                let _ = writeln!(s, "empirical = {:e}", m.empirical);
                let _ = writeln!(s, "theoretical = {:e}", m.theoretical);
                let _ = writeln!(s, "pass = {}", m.pass);
                let _ = writeln!(
                    s,
                    "note = empirical uses the discrete-time maximum over the EM grid"
                );
            }
            None => {
                let _ = writeln!(s, "skipped = true");
            }
        }
        let _ = writeln!(s, "[feller]");
        let _ = writeln!(s, "classification = {:?}", self.feller.classification);
        let _ = writeln!(s, "tail_min = {:e}", self.feller.tail_min);
        let _ = writeln!(s, "limit_estimate = {:e}", self.feller.limit_estimate);
        let _ = writeln!(s, "[runtimes_seconds]");
        let _ = writeln!(s, "pde = {:.3}", self.runtimes.pde.as_secs_f64());
        let _ = writeln!(
            s,
            "monte_carlo = {:.3}",
            self.runtimes.monte_carlo.as_secs_f64()
        );
        let _ = writeln!(s, "checks = {:.3}", self.runtimes.checks.as_secs_f64());
        s
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Solve the PDE and the Monte Carlo problem on the same nodes and compare.
pub fn run_case(label: &str, spec: &ModelSpec, settings: &RunSettings) -> Result<ComparisonReport> {
    spec.validate()
        .map_err(|e| e.at_stage(Stage::Coefficients))?;
    let grid =
        LogGrid::for_spec(spec, settings.n_x).map_err(|e| e.at_stage(Stage::Coefficients))?;

    let t0 = Instant::now();
    let options = SolveOptions {
        snapshot_stride: settings.snapshot_stride,
    };
    let solution =
        solve_pde(spec, &grid, settings.n_t, &options).map_err(|e| e.at_stage(Stage::Pde))?;
    let t_pde = t0.elapsed();

    let t1 = Instant::now();
    let mc =
        estimate_u(spec, &grid.nodes_x, &settings.mc).map_err(|e| e.at_stage(Stage::MonteCarlo))?;
    let t_mc = t1.elapsed();

    let t2 = Instant::now();
    let feller =
        feller_test(spec, &default_feller_probes()).map_err(|e| e.at_stage(Stage::Checks))?;
    let moment_bound = if settings.moment_paths > 0
        && spec.p.certificate().is_some()
        && spec.q.certificate().is_some()
    {
        Some(
            moment_bound_check(
                spec,
                1.0,
                settings.moment_paths,
                settings.mc.n_steps,
                settings.mc.master_seed,
            )
            .map_err(|e| e.at_stage(Stage::Checks))?,
        )
    } else {
        None
    };
    let t_checks = t2.elapsed();

    Ok(assemble(
        label,
        spec,
        settings,
        solution,
        mc,
        moment_bound,
        feller,
        Runtimes {
            pde: t_pde,
            monte_carlo: t_mc,
            checks: t_checks,
        },
    ))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    label: &str,
    spec: &ModelSpec,
    settings: &RunSettings,
    solution: GridSolution,
    mc: Vec<McEstimate>,
    moment_bound: Option<MomentBound>,
    feller: FellerReport,
    runtimes: Runtimes,
) -> ComparisonReport {
    let u_pde = solution.final_values().to_vec();
    let pointwise_error: Vec<f64> = u_pde
        .iter()
        .zip(&mc)
        .map(|(u, e)| (u - e.mean).abs())
        .collect();
    let n = pointwise_error.len();
    let trim = settings.interior_trim.min(n.saturating_sub(1) / 2);
    ComparisonReport {
        label: label.to_string(),
        params: ParameterEcho::of(spec),
        settings: *settings,
        max_abs_error: max_of(&pointwise_error),
        max_abs_error_interior: max_of(&pointwise_error[trim..n - trim]),
        mean_abs_error: pointwise_error.iter().sum::<f64>() / n as f64,
        mc_std_error_max: mc.iter().map(|e| e.std_error).fold(0.0, f64::max),
        pde_min: solution.min_value,
        pde_max: solution.max_value,
        grid: solution.grid,
        u_pde,
        mc,
        pointwise_error,
        moment_bound,
        feller,
        runtimes,
    }
}

/// [`run_case`] on the reference parameters of a built-in case.
pub fn run_reference_case(case: CaseId, master_seed: u64) -> Result<ComparisonReport> {
    run_case(
        case.label(),
        &ModelSpec::reference(case),
        &RunSettings::reference(master_seed),
    )
}

/// `E[sup_t X_t²] ≤ (1 + 3x₀²) e^{6TK²(μ²T + 4σ²)}`, with the supremum taken
/// over the Euler–Maruyama grid.
pub fn moment_bound_check(
    spec: &ModelSpec,
    x0: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<MomentBound> {
    let k = linear_growth_constant_for(spec)?;
    let t = spec.horizon;
    let theoretical = (1.0 + 3.0 * x0 * x0)
        * (6.0 * t * k * k * (spec.mu * spec.mu * t + 4.0 * spec.sigma * spec.sigma)).exp();
    let antithetic = n_paths.is_multiple_of(2);
    let batch = simulate_paths(spec, x0, n_paths, n_steps, seed, antithetic)?;
    let empirical = batch
        .paths()
        .map(|p| p.iter().fold(0.0f64, |m, &x| m.max(x * x)))
        .sum::<f64>()
        / n_paths as f64;
    Ok(MomentBound {
        x0,
        k,
        empirical,
        theoretical,
        pass: empirical <= theoretical,
        n_paths,
        floor_activations: batch.floor_activations,
    })
}

/// Nodes kept for whole-line reference comparisons: `y` at least `margin`
/// away from both truncation boundaries.
pub fn window_mask(grid: &LogGrid, margin: f64) -> Vec<bool> {
    grid.nodes_y
        .iter()
        .map(|&y| y >= grid.y_min + margin && y <= grid.y_max - margin)
        .collect()
}

/// Max `|a − b|` over masked entries.
pub fn masked_max_error(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
    a.iter()
        .zip(b)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((x, y), _)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvergenceReference {
    /// Lognormal quadrature (constant exponents only).
    Gbm,
    /// Self-reference on a finer grid, interpolated to each level's nodes.
    FineGrid { n_x: usize, n_t: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n_x: usize,
    pub n_t: usize,
    pub dy: f64,
    pub dt: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// `log₂(e_k / e_{k+1})`; `None` when either error is at round-off level.
    pub orders: Vec<Option<f64>>,
}

impl ConvergenceTable {
    pub fn render_text(&self) -> String {
        let mut s = String::from("n_x,n_t,dy,dt,error,observed_order\n");
        for (i, r) in self.rows.iter().enumerate() {
            let order = match i.checked_sub(1).and_then(|k| self.orders[k]) {
                Some(o) => format!("{o:.4}"),
                None if i == 0 => String::new(),
                None => "undefined".to_string(),
            };
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{}",
                r.n_x, r.n_t, r.dy, r.dt, r.error, order
            );
        }
        s
    }
}

/// Errors at each refinement level, measured on nodes at least
/// `boundary_layer` (in `y`) away from the truncation boundaries.
pub fn convergence_study(
    spec: &ModelSpec,
    levels: &[(usize, usize)],
    reference: ConvergenceReference,
    boundary_layer: f64,
) -> Result<ConvergenceTable> {
    let fine = match reference {
        ConvergenceReference::FineGrid { n_x, n_t } => {
            let grid = LogGrid::for_spec(spec, n_x)?;
            Some(solve_pde(spec, &grid, n_t, &SolveOptions::default())?)
        }
        ConvergenceReference::Gbm => None,
    };
    let oracle = match reference {
        ConvergenceReference::Gbm => {
            Some(GbmOracle::new(spec).map_err(|e| e.at_stage(Stage::Oracle))?)
        }
        ConvergenceReference::FineGrid { .. } => None,
    };

    let mut rows = Vec::with_capacity(levels.len());
    for &(n_x, n_t) in levels {
        let grid = LogGrid::for_spec(spec, n_x)?;
        let sol = solve_pde(spec, &grid, n_t, &SolveOptions::default())?;
        let reference_values = match (&oracle, &fine) {
            (Some(o), _) => o.values(&grid.nodes_x),
            (None, Some(f)) => grid
                .nodes_y
                .iter()
                .map(|&y| interpolate_cubic(&f.grid, f.final_values(), y))
                .collect(),
            (None, None) => unreachable!(),
        };
        let mask = window_mask(&grid, boundary_layer);
        if !mask.iter().any(|&m| m) {
            return Err(Error::Config(
                "boundary layer leaves no interior nodes".into(),
            ));
        }
        rows.push(ConvergenceRow {
            n_x,
            n_t,
            dy: grid.dy,
            dt: spec.horizon / n_t as f64,
            error: masked_max_error(sol.final_values(), &reference_values, &mask),
        });
    }
    let orders = rows
        .windows(2)
        .map(|w| {
            const ROUND_OFF: f64 = 1e-12;
            if w[0].error <= ROUND_OFF || w[1].error <= ROUND_OFF {
                None
            } else {
                Some((w[0].error / w[1].error).log2())
            }
        })
        .collect();
    Ok(ConvergenceTable { rows, orders })
}

/// Four-point Lagrange interpolation of nodal values on a uniform grid.
pub fn interpolate_cubic(grid: &LogGrid, values: &[f64], y: f64) -> f64 {
    let n = grid.len();
    let s = ((y - grid.y_min) / grid.dy).clamp(0.0, (n - 1) as f64);
    let base = (s.floor() as usize).saturating_sub(1).min(n - 4);
    let t = s - base as f64;
    let mut acc = 0.0;
    for j in 0..4 {
        let mut w = 1.0;
        for m in 0..4 {
            if m != j {
                w *= (t - m as f64) / (j as f64 - m as f64);
            }
        }
        acc += w * values[base + j];
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorRow {
    pub h: f64,
    /// `(Ê[g(X_h)] − g(x)) / h`.
    pub quotient: f64,
    pub std_error: f64,
    /// `|quotient − (ℒg)(x)|`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorStudy {
    pub x: f64,
    pub generator: f64,
    pub rows: Vec<GeneratorRow>,
}

impl GeneratorStudy {
    /// Each error is no larger than the previous one plus `k` standard errors.
    pub fn monotone_within(&self, k: f64) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].error <= w[0].error + k * w[1].std_error.max(w[0].std_error))
    }
}

/// Empirical generator limit: difference quotients of `E[g(X_h)]` for a
/// decreasing list of horizons, each simulated with `substeps` EM steps
/// and the same random streams.
pub fn generator_limit_study(
    spec: &ModelSpec,
    g: Bump,
    x: f64,
    horizons: &[f64],
    n_paths: usize,
    substeps: usize,
    seed: u64,
) -> Result<GeneratorStudy> {
    let generator = generator_apply(spec, &g, x)?;
    let g0 = g.value(x);
    let mut rows = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let mut short = spec.clone();
        short.horizon = h;
        short.potential = ScalarFn::constant(0.0);
        short.payoff = ScalarFn::new("bump", move |y| g.value(y));
        let cfg = McConfig {
            n_paths,
            n_steps: substeps,
            master_seed: seed,
            antithetic: true,
        };
        let est = &estimate_u(&short, &[x], &cfg)?[0];
        let quotient = (est.mean - g0) / h;
        rows.push(GeneratorRow {
            h,
            quotient,
            std_error: est.std_error / h,
            error: (quotient - generator).abs(),
        });
    }
    Ok(GeneratorStudy { x, generator, rows })
}

/// Weak-error allowance `C·Δt` for the Euler–Maruyama estimator, with `C`
/// calibrated from a coupled `Δt` / `Δt/2` run: the bias at `Δt` is about
/// twice the coarse-minus-fine difference.
#[derive(Debug, Clone, PartialEq)]
pub struct EmBiasCalibration {
    pub dt: f64,
    pub constant: f64,
    pub allowance: f64,
    pub differences: Vec<f64>,
}

pub fn calibrate_em_bias(
    spec: &ModelSpec,
    points: &[f64],
    config: &McConfig,
) -> Result<EmBiasCalibration> {
    let coupled = estimate_u_coupled(spec, points, config)?;
    let dt = spec.horizon / config.n_steps as f64;
    let differences: Vec<f64> = coupled.iter().map(|c| c.difference).collect();
    let worst = differences.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let constant = 2.0 * worst / dt;
    Ok(EmBiasCalibration {
        dt,
        constant,
        allowance: constant * dt,
        differences,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    /// Quadrature value at every node.
    pub oracle: Vec<f64>,
    /// Nodes outside the truncation boundary layers.
    pub in_window: Vec<bool>,
    pub pde_window_error: f64,
    pub pde_max_error: f64,
    pub calibration: EmBiasCalibration,
    /// Largest `|û − u_oracle| / (3·(std_error + bias))` over all nodes.
    pub mc_worst_ratio: f64,
    pub pde_pass: bool,
    pub mc_pass: bool,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.pde_pass && self.mc_pass
    }
}

/// Compare a finished run with the lognormal quadrature: the PDE away from
/// the truncation layers to `pde_tolerance`, and the Monte Carlo estimate at
/// every node within three standard errors plus the calibrated EM bias.
/// The bias is calibrated on `calibration_points` evenly spaced nodes.
pub fn oracle_check(
    spec: &ModelSpec,
    report: &ComparisonReport,
    pde_tolerance: f64,
    calibration_points: usize,
) -> Result<OracleCheck> {
    let oracle = GbmOracle::new(spec).map_err(|e| e.at_stage(Stage::Oracle))?;
    let values = oracle.values(report.x());
    let in_window = window_mask(&report.grid, DEFAULT_BOUNDARY_LAYER);
    let pde_window_error = masked_max_error(&report.u_pde, &values, &in_window);
    let pde_max_error = masked_max_error(&report.u_pde, &values, &vec![true; values.len()]);

    let n = report.grid.len();
    let k = calibration_points.clamp(1, n);
    let points: Vec<f64> = (0..k)
        .map(|j| report.grid.nodes_x[if k == 1 { n / 2 } else { j * (n - 1) / (k - 1) }])
        .collect();
    let calibration = calibrate_em_bias(spec, &points, &report.settings.mc).map_err(|e| e.at_stage(Stage::Oracle))?;

    let mc_worst_ratio = report
        .mc
        .iter()
        .zip(&values)
        .map(|(e, o)| (e.mean - o).abs() / (3.0 * (e.std_error + calibration.allowance)))
        .fold(0.0, f64::max);
    Ok(OracleCheck {
        oracle: values,
        in_window,
        pde_window_error,
        pde_max_error,
        calibration,
        mc_worst_ratio,
        pde_pass: pde_window_error <= pde_tolerance,
        mc_pass: mc_worst_ratio <= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_is_exact_for_cubics() {
        let grid = LogGrid::new(0.5, 8.0, 30).unwrap();
        let f = |y: f64| 0.3 * y * y * y - y * y + 2.0 * y - 1.0;
        let values: Vec<f64> = grid.nodes_y.iter().map(|&y| f(y)).collect();
        for &y in &[
            grid.y_min,
            grid.y_min + 0.013,
            0.4,
            1.7,
            grid.y_max - 1e-3,
            grid.y_max,
        ] {
            assert!(
                (interpolate_cubic(&grid, &values, y) - f(y)).abs() < 1e-12,
                "y = {y}"
            );
        }
    }

    #[test]
    fn window_mask_excludes_boundary_layers() {
        let grid = LogGrid::new(0.1, 50.0, 400).unwrap();
        let mask = window_mask(&grid, 1.0);
        for (i, &m) in mask.iter().enumerate() {
            let x = grid.nodes_x[i];
            assert_eq!(
                m,
                x >= 0.1 * 1f64.exp() - 1e-12 && x <= 50.0 / 1f64.exp() + 1e-12
            );
        }
    }

    #[test]
    fn constant_solution_convergence_has_undefined_order() {
        let mut s = ModelSpec::reference(CaseId::Case3);
        s.payoff = ScalarFn::constant(1.0);
        s.potential = ScalarFn::constant(0.0);
        let table =
            convergence_study(&s, &[(50, 50), (100, 100)], ConvergenceReference::Gbm, 1.0).unwrap();
        assert!(table.rows.iter().all(|r| r.error <= 1e-12));
        assert_eq!(table.orders, vec![None]);
        assert!(table.render_text().contains("undefined"));
    }

    #[test]
    fn frozen_paths_moment_bound() {
        let mut s = ModelSpec::reference(CaseId::Case3);
        s.mu = 0.0;
        s.sigma = 1e-8;
        let m = moment_bound_check(&s, 1.0, 200, 50, 3).unwrap();
        assert!((m.empirical - 1.0).abs() < 1e-6);
        assert!(m.theoretical >= 4.0);
        assert!(m.pass);
    }

    #[test]
    fn gbm_moment_bound_value() {
        let s = ModelSpec::reference(CaseId::Case3);
        let m = moment_bound_check(&s, 1.0, 2000, 400, 3).unwrap();
        assert_eq!(m.k, 1.0);
        assert!((m.theoretical - 4.0 * 1.02f64.exp()).abs() < 1e-12);
        assert!(m.pass);
    }
}
