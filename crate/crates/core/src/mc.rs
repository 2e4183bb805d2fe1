//! Monte Carlo estimation of `u(x, T) = E_x[exp(−∫₀ᵀ V(X_s) ds) f(X_T)]`.
//!
//! Each start point is simulated with the same path-indexed normal streams
//! (common random numbers). With antithetic pairing, the i.i.d. sampling unit
//! is the average of a `(+Z, −Z)` pair; the standard error is computed over
//! units, not raw paths.
//!
//! Work is split into fixed blocks of units. Blocks run in parallel and their
//! moments are merged in block order, so results do not depend on the number
//! of worker threads.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::sde::{check_simulation_args, em_step, fill_normals};

/// Units per parallel work item. Part of the reproducibility contract:
/// changing it changes floating-point summation order.
const BLOCK_UNITS: usize = 64;

/// Quadrature rule for `∫ V(X_s) ds` along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscountRule {
    /// `Σ_{n=0}^{N−1} V(X_{t_n}) Δt`, terminal state excluded.
    LeftRiemann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub master_seed: u64,
    pub antithetic: bool,
}

impl McConfig {
    /// 20,000 paths (10,000 antithetic pairs), 400 steps.
    pub fn reference(master_seed: u64) -> Self {
        Self {
            n_paths: 20_000,
            n_steps: 400,
            master_seed,
            antithetic: true,
        }
    }

    pub fn n_units(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub start_x: f64,
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Number of i.i.d. units behind `std_error`.
    pub n_units: usize,
    pub discount_rule: DiscountRule,
    /// Smallest state visited by any path.
    pub min_state: f64,
    pub floor_activations: usize,
    /// `max |f(X_T)|` over all paths; `|mean|` never exceeds it since `V ≥ 0`.
    pub max_abs_payoff: f64,
}

/// `f(X_T) · exp(−Σ_{n<N} V(X_{t_n}) Δt)` for one stored trajectory.
pub fn path_functional(spec: &ModelSpec, path_index: usize, path: &[f64], dt: f64) -> Result<f64> {
    let (&terminal, body) = path
        .split_last()
        .ok_or_else(|| Error::Config("empty path".into()))?;
    let mut acc = 0.0;
    for &x in body {
        acc += potential(spec, path_index, x)? * dt;
    }
    let payoff = payoff(spec, path_index, terminal)?;
    Ok(payoff * (-acc).exp())
}

#[inline]
fn potential(spec: &ModelSpec, path: usize, x: f64) -> Result<f64> {
    spec.potential_at(x).map_err(|_| Error::Numeric {
        path,
        what: "potential V",
        state: x,
    })
}

#[inline]
fn payoff(spec: &ModelSpec, path: usize, x: f64) -> Result<f64> {
    spec.payoff_at(x).map_err(|_| Error::Numeric {
        path,
        what: "payoff f",
        state: x,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Outcome {
    value: f64,
    payoff: f64,
    min_state: f64,
    floors: usize,
}

#[derive(Debug, Clone, Copy)]
struct Lane {
    path: usize,
    start_x: f64,
    sign: f64,
}

/// Paths simulated together. Each step is a serial chain of `ln`/`exp`
/// calls, so interleaving independent paths keeps the FPU busy.
const LANES: usize = 4;

/// Simulate `L` paths in lockstep and evaluate their functionals without
/// storing states. Per path this is exactly the arithmetic of `em_path`
/// followed by `path_functional`.
#[inline]
fn simulate_lanes<const L: usize>(
    spec: &ModelSpec,
    lanes: &[Lane; L],
    dt: f64,
    sqrt_dt: f64,
    normals: &[f64],
) -> Result<[Outcome; L]> {
    let mut x: [f64; L] = std::array::from_fn(|k| lanes[k].start_x);
    let mut acc = [0.0; L];
    let mut min_state = x;
    let mut floors = [0usize; L];
    for &z in normals {
        for k in 0..L {
            acc[k] += potential(spec, lanes[k].path, x[k])? * dt;
            let (next, clamped) = em_step(spec, x[k], dt, sqrt_dt, lanes[k].sign * z);
            floors[k] += clamped as usize;
            x[k] = next;
            min_state[k] = min_state[k].min(next);
        }
    }
    let mut out = [Outcome::default(); L];
    for k in 0..L {
        let path = lanes[k].path;
        if !x[k].is_finite() {
            return Err(Error::Numeric {
                path,
                what: "state",
                state: x[k],
            });
        }
        let payoff = payoff(spec, path, x[k])?;
        out[k] = Outcome {
            value: payoff * (-acc[k]).exp(),
            payoff,
            min_state: min_state[k],
            floors: floors[k],
        };
    }
    Ok(out)
}

/// Simulate every lane, `LANES` at a time, writing outcomes in lane order.
fn simulate_all(
    spec: &ModelSpec,
    lanes: &[Lane],
    dt: f64,
    sqrt_dt: f64,
    normals: &[f64],
    out: &mut [Outcome],
) -> Result<()> {
    let mut chunks = lanes.chunks_exact(LANES);
    let mut slots = out.chunks_exact_mut(LANES);
    for (group, slot) in (&mut chunks).zip(&mut slots) {
        let group: &[Lane; LANES] = group.try_into().expect("exact chunk");
        slot.copy_from_slice(&simulate_lanes(spec, group, dt, sqrt_dt, normals)?);
    }
    for (lane, slot) in chunks.remainder().iter().zip(slots.into_remainder()) {
        *slot = simulate_lanes(spec, &[*lane], dt, sqrt_dt, normals)?[0];
    }
    Ok(())
}

/// Streaming mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * (other.n as f64 / n as f64);
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    /// Standard error of the mean (sample standard deviation / √n).
    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let var = (self.m2 / (self.n - 1) as f64).max(0.0);
        (var / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
struct PointAcc {
    moments: Moments,
    min_state: f64,
    floors: usize,
    max_abs_payoff: f64,
}

impl PointAcc {
    fn new() -> Self {
        Self {
            moments: Moments::default(),
            min_state: f64::INFINITY,
            floors: 0,
            max_abs_payoff: 0.0,
        }
    }

    fn observe(&mut self, o: &Outcome) {
        self.min_state = self.min_state.min(o.min_state);
        self.floors += o.floors;
        self.max_abs_payoff = self.max_abs_payoff.max(o.payoff.abs());
    }

    fn merge(&mut self, other: &PointAcc) {
        self.moments.merge(&other.moments);
        self.min_state = self.min_state.min(other.min_state);
        self.floors += other.floors;
        self.max_abs_payoff = self.max_abs_payoff.max(other.max_abs_payoff);
    }
}

/// Run `work` over fixed unit blocks in parallel; results in block order.
fn run_blocks<A, F>(n_units: usize, work: F) -> Result<Vec<A>>
where
    A: Send,
    F: Fn(Range<usize>) -> Result<A> + Sync,
{
    let n_blocks = n_units.div_ceil(BLOCK_UNITS);
    (0..n_blocks)
        .into_par_iter()
        .map(|b| work(b * BLOCK_UNITS..((b + 1) * BLOCK_UNITS).min(n_units)))
        .collect()
}

fn check_args(spec: &ModelSpec, start_points: &[f64], config: &McConfig) -> Result<()> {
    for &x in start_points {
        check_simulation_args(spec, x, config.n_paths, config.n_steps, config.antithetic)?;
    }
    if start_points.is_empty() {
        check_simulation_args(spec, 1.0, config.n_paths, config.n_steps, config.antithetic)?;
    }
    Ok(())
}

/// Estimate `u(x, T)` at every start point using common random numbers.
pub fn estimate_u(
    spec: &ModelSpec,
    start_points: &[f64],
    config: &McConfig,
) -> Result<Vec<McEstimate>> {
    check_args(spec, start_points, config)?;
    let n_steps = config.n_steps;
    let dt = spec.horizon / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let n_units = config.n_units();

    let blocks = run_blocks(n_units, |units| {
        let mut acc = vec![PointAcc::new(); start_points.len()];
        let mut z = vec![0.0; n_steps];
        let per_point = if config.antithetic { 2 } else { 1 };
        let mut lanes = Vec::with_capacity(per_point * start_points.len());
        let mut outcomes = vec![Outcome::default(); per_point * start_points.len()];
        for unit in units {
            fill_normals(config.master_seed, unit as u64, &mut z);
            lanes.clear();
            for &x0 in start_points {
                if config.antithetic {
                    lanes.push(Lane {
                        path: 2 * unit,
                        start_x: x0,
                        sign: 1.0,
                    });
                    lanes.push(Lane {
                        path: 2 * unit + 1,
                        start_x: x0,
                        sign: -1.0,
                    });
                } else {
                    lanes.push(Lane {
                        path: unit,
                        start_x: x0,
                        sign: 1.0,
                    });
                }
            }
            simulate_all(spec, &lanes, dt, sqrt_dt, &z, &mut outcomes)?;
            for (slot, o) in acc.iter_mut().zip(outcomes.chunks_exact(per_point)) {
                if let [up, down] = o {
                    slot.moments.push(0.5 * (up.value + down.value));
                    slot.observe(up);
                    slot.observe(down);
                } else {
                    slot.moments.push(o[0].value);
                    slot.observe(&o[0]);
                }
            }
        }
        Ok(acc)
    })?;

    let mut total = vec![PointAcc::new(); start_points.len()];
    for block in &blocks {
        for (t, b) in total.iter_mut().zip(block) {
            t.merge(b);
        }
    }

    Ok(total
        .into_iter()
        .zip(start_points)
        .map(|(acc, &x0)| McEstimate {
            start_x: x0,
            mean: acc.moments.mean,
            std_error: acc.moments.std_error(),
            n_paths: config.n_paths,
            n_units,
            discount_rule: DiscountRule::LeftRiemann,
            min_state: acc.min_state,
            floor_activations: acc.floors,
            max_abs_payoff: acc.max_abs_payoff,
        })
        .collect())
}

/// Estimates at step `Δt` and `Δt/2` driven by the same Brownian increments:
/// the coarse path uses `(Z_{2n} + Z_{2n+1})/√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledEstimate {
    pub start_x: f64,
    pub coarse: f64,
    pub fine: f64,
    /// Mean of `coarse − fine` per unit, with its standard error.
    pub difference: f64,
    pub difference_std_error: f64,
}

/// Coupled coarse/fine estimates; `config.n_steps` is the coarse step count.
pub fn estimate_u_coupled(
    spec: &ModelSpec,
    start_points: &[f64],
    config: &McConfig,
) -> Result<Vec<CoupledEstimate>> {
    check_args(spec, start_points, config)?;
    let n_coarse = config.n_steps;
    let dt = spec.horizon / n_coarse as f64;
    let (dt_f, sqrt_dt, sqrt_dt_f) = (dt / 2.0, dt.sqrt(), (dt / 2.0).sqrt());
    let n_units = config.n_units();
    let signs: &[f64] = if config.antithetic {
        &[1.0, -1.0]
    } else {
        &[1.0]
    };

    let blocks = run_blocks(n_units, |units| {
        let mut acc = vec![[Moments::default(); 3]; start_points.len()];
        let mut fine = vec![0.0; 2 * n_coarse];
        let mut coarse = vec![0.0; n_coarse];
        for unit in units {
            fill_normals(config.master_seed, unit as u64, &mut fine);
            for (c, pair) in coarse.iter_mut().zip(fine.chunks_exact(2)) {
                *c = (pair[0] + pair[1]) * std::f64::consts::FRAC_1_SQRT_2;
            }
            for (slot, &x0) in acc.iter_mut().zip(start_points) {
                let (mut vc, mut vf) = (0.0, 0.0);
                for (k, &sign) in signs.iter().enumerate() {
                    let path = signs.len() * unit + k;
                    let lane = [Lane {
                        path,
                        start_x: x0,
                        sign,
                    }];
                    vc += simulate_lanes(spec, &lane, dt, sqrt_dt, &coarse)?[0].value;
                    vf += simulate_lanes(spec, &lane, dt_f, sqrt_dt_f, &fine)?[0].value;
                }
                let w = signs.len() as f64;
                let (vc, vf) = (vc / w, vf / w);
                slot[0].push(vc);
                slot[1].push(vf);
                slot[2].push(vc - vf);
            }
        }
        Ok(acc)
    })?;

    let mut total = vec![[Moments::default(); 3]; start_points.len()];
    for block in &blocks {
        for (t, b) in total.iter_mut().zip(block) {
            for k in 0..3 {
                t[k].merge(&b[k]);
            }
        }
    }
    Ok(total
        .into_iter()
        .zip(start_points)
        .map(|(m, &x0)| CoupledEstimate {
            start_x: x0,
            coarse: m[0].mean,
            fine: m[1].mean,
            difference: m[2].mean,
            difference_std_error: m[2].std_error(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::CaseId;
    use crate::model::ScalarFn;
    use crate::sde::simulate_paths;

    fn small(seed: u64) -> McConfig {
        McConfig {
            n_paths: 400,
            n_steps: 50,
            master_seed: seed,
            antithetic: true,
        }
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.01).collect();
        let mut one = Moments::default();
        xs.iter().for_each(|&x| one.push(x));
        let mut merged = Moments::default();
        for chunk in xs.chunks(64) {
            let mut m = Moments::default();
            chunk.iter().for_each(|&x| m.push(x));
            merged.merge(&m);
        }
        assert_eq!(one.n, merged.n);
        assert!((one.mean - merged.mean).abs() < 1e-14);
        assert!((one.m2 - merged.m2).abs() < 1e-10);
    }

    #[test]
    fn functional_edge_cases() {
        let mut s = ModelSpec::reference(CaseId::Case1);
        s.potential = ScalarFn::constant(0.0);
        let path = [1.0, 1.1, 0.9, 1.3];
        assert_eq!(
            path_functional(&s, 0, &path, 0.25).unwrap(),
            (-0.1f64 * 1.3).exp()
        );

        s.potential = ScalarFn::constant(0.1);
        s.payoff = ScalarFn::constant(1.0);
        let path = vec![2.0; 401];
        let v = path_functional(&s, 0, &path, 1.0 / 400.0).unwrap();
        assert!((v - (-0.1f64).exp()).abs() < 1e-15);

        // Frozen path under the reference potential and payoff.
        let s = ModelSpec::reference(CaseId::Case3);
        let x = 3.0;
        let v = path_functional(&s, 0, &vec![x; 401], 1.0 / 400.0).unwrap();
        assert!((v - (-0.1f64).exp() * (-0.1 * x).exp()).abs() < 1e-15);
    }

    #[test]
    fn functional_reports_bad_values() {
        let mut s = ModelSpec::reference(CaseId::Case3);
        s.payoff = ScalarFn::new("1/(x-2)", |x| 1.0 / (x - 2.0));
        let err = path_functional(&s, 7, &[1.0, 2.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::Numeric { path: 7, .. }), "{err}");
        s.payoff = ScalarFn::constant(1.0);
        s.potential = ScalarFn::constant(-1.0);
        assert!(path_functional(&s, 0, &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn streaming_matches_stored_paths() {
        let s = ModelSpec::reference(CaseId::Case1);
        let cfg = small(11);
        let est = estimate_u(&s, &[0.8], &cfg).unwrap();
        let batch =
            simulate_paths(&s, 0.8, cfg.n_paths, cfg.n_steps, cfg.master_seed, true).unwrap();
        let mut m = Moments::default();
        for j in 0..cfg.n_paths / 2 {
            let a = path_functional(&s, 2 * j, batch.path(2 * j), batch.dt).unwrap();
            let b = path_functional(&s, 2 * j + 1, batch.path(2 * j + 1), batch.dt).unwrap();
            m.push(0.5 * (a + b));
        }
        // Same per-unit values; only block merging differs.
        assert!((est[0].mean - m.mean).abs() < 1e-15);
        assert!((est[0].std_error - m.std_error()).abs() < 1e-15);
    }

    #[test]
    fn constant_functional_has_zero_error() {
        let mut s = ModelSpec::reference(CaseId::Case1);
        s.payoff = ScalarFn::constant(2.5);
        s.potential = ScalarFn::constant(0.3);
        let est = estimate_u(&s, &[0.2, 1.0, 40.0], &small(5)).unwrap();
        let mut acc = 0.0f64;
        for _ in 0..50 {
            acc += 0.3 * (1.0 / 50.0);
        }
        for e in est {
            assert_eq!(e.mean, 2.5 * (-acc).exp());
            assert_eq!(e.std_error, 0.0);
            assert!((e.mean - 2.5 * (-0.3f64).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn common_random_numbers_are_order_independent() {
        let s = ModelSpec::reference(CaseId::Case2);
        let pts = [0.5, 0.6, 3.0];
        let fwd = estimate_u(&s, &pts, &small(2)).unwrap();
        let rev_pts: Vec<f64> = pts.iter().rev().copied().collect();
        let mut rev = estimate_u(&s, &rev_pts, &small(2)).unwrap();
        rev.reverse();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn thread_count_does_not_change_estimates() {
        let s = ModelSpec::reference(CaseId::Case1);
        let cfg = McConfig {
            n_paths: 1000,
            ..small(8)
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_u(&s, &[0.3, 2.0], &cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn odd_paths_rejected_with_antithetic() {
        let s = ModelSpec::reference(CaseId::Case1);
        let cfg = McConfig {
            n_paths: 401,
            ..small(1)
        };
        assert!(matches!(
            estimate_u(&s, &[1.0], &cfg),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            estimate_u(&s, &[0.0], &small(1)),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn coupled_difference_is_small_and_consistent() {
        let s = ModelSpec::reference(CaseId::Case1);
        let cfg = small(4);
        let c = estimate_u_coupled(&s, &[0.5, 5.0], &cfg).unwrap();
        for e in &c {
            assert!((e.coarse - e.fine - e.difference).abs() < 1e-12);
            assert!(e.difference.abs() < 1e-3);
        }
    }
}
