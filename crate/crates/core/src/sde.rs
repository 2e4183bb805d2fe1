//! Coefficients, boundary and growth diagnostics, the generator, and
//! Euler–Maruyama simulation of `dX = μX^{p(X)}dt + σX^{q(X)}dW`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exponent::ExponentFunction;
use crate::model::ModelSpec;

/// Positivity floor applied after every Euler–Maruyama update.
pub const POSITIVITY_FLOOR: f64 = 1e-10;

/// Tolerance on the tail minimum of the Feller functional.
pub const FELLER_TOLERANCE: f64 = 1e-8;

/// `(μx^{p(x)}, σx^{q(x)})` without domain checks. Both solvers and the
/// public [`drift`]/[`diffusion`] go through here so they agree bit for bit.
#[inline]
pub(crate) fn coefficients(spec: &ModelSpec, x: f64) -> (f64, f64) {
    let ln_x = x.ln();
    (
        spec.mu * spec.p.power_of(x, ln_x),
        spec.sigma * spec.q.power_of(x, ln_x),
    )
}

fn check_state(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { x })
    }
}

pub fn drift(spec: &ModelSpec, x: f64) -> Result<f64> {
    check_state(x)?;
    Ok(coefficients(spec, x).0)
}

pub fn diffusion(spec: &ModelSpec, x: f64) -> Result<f64> {
    check_state(x)?;
    Ok(coefficients(spec, x).1)
}

/// `K = max{δ^{q⁻}, δ^{p⁻}, e^{M∞}}`, the linear-growth constant with
/// `x^{q(x)} ≤ K(1 + x)`.
pub fn linear_growth_constant(
    p: &ExponentFunction,
    q: &ExponentFunction,
    delta: f64,
    m_inf: f64,
) -> Result<f64> {
    let p_minus = p.require_certificate()?.h_minus;
    let q_minus = q.require_certificate()?.h_minus;
    Ok(delta
        .powf(q_minus)
        .max(delta.powf(p_minus))
        .max(m_inf.exp()))
}

/// [`linear_growth_constant`] with `δ` and `M∞` taken from the two
/// certificates (smallest `δ`, largest `M∞`).
pub fn linear_growth_constant_for(spec: &ModelSpec) -> Result<f64> {
    let cp = spec.p.require_certificate()?;
    let cq = spec.q.require_certificate()?;
    linear_growth_constant(
        &spec.p,
        &spec.q,
        cp.delta.min(cq.delta),
        cp.m_inf.max(cq.m_inf),
    )
}

/// Largest `x^{h(x)} / (K(1+x))` over `xs` with the abscissa where it occurs.
/// Values above 1 violate the linear-growth bound.
pub fn linear_growth_ratio(h: &ExponentFunction, k: f64, xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .map(|&x| (h.power_of(x, x.ln()) / (k * (1.0 + x)), x))
        .fold((f64::NEG_INFINITY, f64::NAN), |acc, cur| {
            if cur.0 > acc.0 {
                cur
            } else {
                acc
            }
        })
}

/// `𝒯(x) = μx^{p(x)} − (σ²/2)·∂ₓx^{2q(x)}` with the analytical derivative
/// `∂ₓx^{2q} = x^{2q}(2q′(x) log x + 2q(x)/x)`.
pub fn feller_functional(spec: &ModelSpec, x: f64) -> f64 {
    let ln_x = x.ln();
    let q = spec.q.eval_with_ln(x, ln_x);
    let x2q = spec.q.double_power_of(x, ln_x);
    let d_x2q = x2q * (2.0 * spec.q.deriv(x) * ln_x + 2.0 * q / x);
    spec.mu * spec.p.power_of(x, ln_x) - 0.5 * spec.sigma * spec.sigma * d_x2q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryClass {
    /// Tail minimum of `𝒯` is at least `−tol`: zero is never reached.
    NonAttainable,
    /// The probes do not establish a nonnegative limit.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FellerReport {
    /// `(x, 𝒯(x))` for each probe, largest `x` first.
    pub values: Vec<(f64, f64)>,
    /// Minimum of `𝒯` over the trailing third of the probes.
    pub tail_min: f64,
    /// `𝒯` at the smallest probe.
    pub limit_estimate: f64,
    pub classification: BoundaryClass,
}

/// Probes `10^{-k}` for `k = 2..=12`.
pub fn default_feller_probes() -> Vec<f64> {
    (2..=12).map(|k| 10f64.powi(-k)).collect()
}

/// Evaluate `𝒯` along a decreasing probe sequence towards `0⁺` and classify
/// the boundary at zero.
pub fn feller_test(spec: &ModelSpec, probes: &[f64]) -> Result<FellerReport> {
    if probes.is_empty() {
        return Err(Error::Config("feller_test needs at least one probe".into()));
    }
    if probes.iter().any(|&x| x.is_nan() || x <= 0.0) || probes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "feller probes must be strictly positive and strictly decreasing".into(),
        ));
    }
    let mut values = Vec::with_capacity(probes.len());
    for &x in probes {
        let t = feller_functional(spec, x);
        if !t.is_finite() {
            return Err(Error::FellerNonFinite { x, value: t });
        }
        values.push((x, t));
    }
    let tail_len = probes.len().div_ceil(3);
    let tail_min = values[values.len() - tail_len..]
        .iter()
        .map(|&(_, t)| t)
        .fold(f64::INFINITY, f64::min);
    let limit_estimate = values[values.len() - 1].1;
    let classification = if tail_min >= -FELLER_TOLERANCE {
        BoundaryClass::NonAttainable
    } else {
        BoundaryClass::Inconclusive
    };
    Ok(FellerReport {
        values,
        tail_min,
        limit_estimate,
        classification,
    })
}

/// A function with two derivatives, for applying the generator.
pub trait TestFunction: Sync {
    fn value(&self, x: f64) -> f64;
    fn first(&self, x: f64) -> f64;
    fn second(&self, x: f64) -> f64;
}

/// Standard smooth bump `exp(−1/(1−s²))`, `s = (x − center)/half_width`,
/// supported on `[center − half_width, center + half_width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
}

impl Bump {
    fn parts(&self, x: f64) -> Option<(f64, f64, f64)> {
        let s = (x - self.center) / self.half_width;
        let w = 1.0 - s * s;
        if w <= 0.0 {
            return None;
        }
        Some((s, w, (-1.0 / w).exp()))
    }
}

impl TestFunction for Bump {
    fn value(&self, x: f64) -> f64 {
        self.parts(x).map_or(0.0, |(_, _, g)| g)
    }

    fn first(&self, x: f64) -> f64 {
        self.parts(x)
            .map_or(0.0, |(s, w, g)| g * (-2.0 * s / (w * w)) / self.half_width)
    }

    fn second(&self, x: f64) -> f64 {
        self.parts(x).map_or(0.0, |(s, w, g)| {
            let h1 = -2.0 * s / (w * w);
            let h2 = (-2.0 * w - 8.0 * s * s) / (w * w * w);
            g * (h1 * h1 + h2) / (self.half_width * self.half_width)
        })
    }
}

/// `(ℒg)(x) = ½σ²x^{2q(x)}g″(x) + μx^{p(x)}g′(x)`.
pub fn generator_apply(spec: &ModelSpec, g: &dyn TestFunction, x: f64) -> Result<f64> {
    check_state(x)?;
    let ln_x = x.ln();
    let x2q = spec.q.double_power_of(x, ln_x);
    let xp = spec.p.power_of(x, ln_x);
    Ok(0.5 * spec.sigma * spec.sigma * x2q * g.second(x) + spec.mu * xp * g.first(x))
}

/// Independent normal stream for `stream` under `master_seed`. Streams are
/// addressed by index, so any scheduling of paths over threads sees the same
/// draws.
pub fn normal_stream(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

pub fn fill_normals(master_seed: u64, stream: u64, out: &mut [f64]) {
    let mut rng = normal_stream(master_seed, stream);
    for z in out.iter_mut() {
        *z = StandardNormal.sample(&mut rng);
    }
}

/// Normal draws driving path `path` of a batch. With antithetic pairing,
/// paths `2j` and `2j + 1` share stream `j` with opposite signs.
pub fn path_normals(master_seed: u64, path: usize, n_steps: usize, antithetic: bool) -> Vec<f64> {
    let mut z = vec![0.0; n_steps];
    if antithetic {
        fill_normals(master_seed, (path / 2) as u64, &mut z);
        if path % 2 == 1 {
            z.iter_mut().for_each(|v| *v = -*v);
        }
    } else {
        fill_normals(master_seed, path as u64, &mut z);
    }
    z
}

/// One Euler–Maruyama update followed by the positivity floor. Returns the new
/// state and whether the floor was applied.
#[inline]
pub fn em_step(spec: &ModelSpec, x: f64, dt: f64, sqrt_dt: f64, z: f64) -> (f64, bool) {
    let (a, b) = coefficients(spec, x);
    let next = x + a * dt + b * sqrt_dt * z;
    if next < POSITIVITY_FLOOR {
        (POSITIVITY_FLOOR, true)
    } else {
        (next, false)
    }
}

/// Write the trajectory from `start_x` driven by `sign · normals` into `out`
/// (length `normals.len() + 1`). Returns the number of floor activations.
pub fn em_path(
    spec: &ModelSpec,
    start_x: f64,
    dt: f64,
    normals: &[f64],
    sign: f64,
    out: &mut [f64],
) -> usize {
    debug_assert_eq!(out.len(), normals.len() + 1);
    let sqrt_dt = dt.sqrt();
    let mut floors = 0;
    let mut x = start_x;
    out[0] = x;
    for (slot, &z) in out[1..].iter_mut().zip(normals) {
        let (next, clamped) = em_step(spec, x, dt, sqrt_dt, sign * z);
        floors += clamped as usize;
        x = next;
        *slot = x;
    }
    floors
}

/// Full trajectories of a batch of Euler–Maruyama paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub start_x: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub antithetic: bool,
    /// Row-major `n_paths × (n_steps + 1)`.
    pub values: Vec<f64>,
    pub floor_activations: usize,
}

impl PathBatch {
    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.n_steps + 1;
        &self.values[i * w..(i + 1) * w]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_steps + 1)
    }

    pub fn terminal(&self, i: usize) -> f64 {
        self.path(i)[self.n_steps]
    }
}

pub(crate) fn check_simulation_args(
    spec: &ModelSpec,
    start_x: f64,
    n_paths: usize,
    n_steps: usize,
    antithetic: bool,
) -> Result<()> {
    spec.validate()?;
    if !(start_x >= POSITIVITY_FLOOR && start_x.is_finite()) {
        return Err(Error::Domain { x: start_x });
    }
    if n_steps == 0 || n_paths == 0 {
        return Err(Error::Config("n_paths and n_steps must be positive".into()));
    }
    if antithetic && n_paths % 2 == 1 {
        return Err(Error::Config(format!(
            "antithetic pairing needs an even number of paths, got {n_paths}"
        )));
    }
    Ok(())
}

/// Simulate `n_paths` trajectories from `start_x` over `[0, T]`.
///
/// Rows are ordered by path index and each path's draws come from its own
/// indexed stream, so the batch is bit-identical for any thread count.
pub fn simulate_paths(
    spec: &ModelSpec,
    start_x: f64,
    n_paths: usize,
    n_steps: usize,
    master_seed: u64,
    antithetic: bool,
) -> Result<PathBatch> {
    check_simulation_args(spec, start_x, n_paths, n_steps, antithetic)?;
    let dt = spec.horizon / n_steps as f64;
    let width = n_steps + 1;
    let group = if antithetic { 2 } else { 1 };

    let mut values = vec![0.0; n_paths * width];
    let floors: usize = values
        .par_chunks_mut(group * width)
        .enumerate()
        .map(|(unit, rows)| {
            let mut z = vec![0.0; n_steps];
            fill_normals(master_seed, unit as u64, &mut z);
            rows.chunks_exact_mut(width)
                .enumerate()
                .map(|(k, row)| {
                    let sign = if k == 0 { 1.0 } else { -1.0 };
                    em_path(spec, start_x, dt, &z, sign, row)
                })
                .sum::<usize>()
        })
        .sum();

    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            path: pos / width,
            what: "state",
            state: values[pos],
        });
    }

    Ok(PathBatch {
        start_x,
        n_paths,
        n_steps,
        dt,
        antithetic,
        values,
        floor_activations: floors,
    })
}
