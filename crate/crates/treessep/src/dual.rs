//! Duality oracles: one-point expectations through the single-walker kernel
//! and two-point expectations through the pair walk on off-diagonal vertex
//! pairs. The pair walk follows the exact rate table: two walkers step
//! independently when apart, and when adjacent they exchange positions at
//! rate 1 instead of colliding, so an adjacent pair exits at total rate
//! `2d + 1` while a distant pair exits at `2(d + 1)`. That asymmetry is
//! preserved, never symmetrized away.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact;
use crate::kernel::{poisson_window, radial_distribution};
use crate::ssep::{self, Configuration};
use crate::tree::Ball;

/// Ordered pair of distinct ball vertices (the pair walk never occupies the
/// diagonal).
pub type PairState = (usize, usize);

/// Cap on the dense pair space.
const MAX_PAIR_VERTICES: usize = 2048;

/// Boundary handling for the pair kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Rates of the ball graph itself: boundary vertices have fewer moves.
    /// This is the dual of the exclusion process on the closed ball and
    /// matches its exact semigroup.
    Closed,
    /// Rates of the infinite tree, truncated: moves leaving the ball are
    /// dropped into the `leak` account. This approximates the infinite-tree
    /// pair kernel with a certified deficit.
    Absorbing,
}

/// One row of the pair-walk kernel `q_t(source, .)`.
#[derive(Debug, Clone)]
pub struct PairKernelRow {
    pub source: PairState,
    pub t: f64,
    pub probabilities: BTreeMap<PairState, f64>,
    /// Poisson truncation plus (in absorbing mode) mass that left the ball.
    pub leak: f64,
    /// Upper bound on `2 int_0^t P(walkers adjacent at u) du`, the scale of
    /// the exclusion interaction between the two walkers.
    pub interaction_bound: f64,
}

impl PairKernelRow {
    pub fn total(&self) -> f64 {
        self.probabilities.values().sum()
    }

    /// Marginal law of the first walker.
    pub fn first_marginal(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&(z, _), &q) in &self.probabilities {
            out[z] += q;
        }
        out
    }
}

struct PairSpace<'a> {
    ball: &'a Ball,
    n: usize,
}

impl PairSpace<'_> {
    #[inline]
    fn idx(&self, s: PairState) -> usize {
        s.0 * self.n + s.1
    }

    #[inline]
    fn adjacent(&self, i: usize, j: usize) -> bool {
        self.ball.parent_of(i) == Some(j) || self.ball.parent_of(j) == Some(i)
    }
}

/// Solve the pair-walk forward equation by uniformization with the constant
/// `2 (d + 1)`, the maximum total exit rate over pair states.
pub fn pair_kernel(
    ball: &Ball,
    source: PairState,
    t: f64,
    mode: BoundaryMode,
    tol: f64,
) -> Result<PairKernelRow> {
    let n = ball.len();
    if n > MAX_PAIR_VERTICES {
        return Err(Error::StateSpaceTooLarge {
            states: (n as u64) * (n as u64),
            cap: (MAX_PAIR_VERTICES as u64) * (MAX_PAIR_VERTICES as u64),
        });
    }
    if source.0 == source.1 || source.0 >= n || source.1 >= n {
        return Err(Error::Domain(format!(
            "pair source ({}, {}) must be two distinct ball vertices",
            source.0, source.1
        )));
    }
    let space = PairSpace { ball, n };
    let rate = 2.0 * (f64::from(ball.d()) + 1.0);
    let window = poisson_window(rate * t, (tol * 0.5).max(1e-300));
    let steps = window.weights.len() - 1;
    let mut v = vec![0.0f64; n * n];
    v[space.idx(source)] = 1.0;
    let mut acc = vec![0.0f64; n * n];
    let mut next = vec![0.0f64; n * n];
    let mut dropped_total = 0.0f64;
    let mut adjacent_step_sum = 0.0f64;
    for (step, &w) in window.weights.iter().enumerate() {
        if w > 0.0 {
            for (a, &m) in acc.iter_mut().zip(v.iter()) {
                *a += w * m;
            }
        }
        if step < steps {
            for x in next.iter_mut() {
                *x = 0.0;
            }
            for i in 0..n {
                for j in 0..n {
                    let mass = v[i * n + j];
                    if mass == 0.0 || i == j {
                        continue;
                    }
                    let share = mass / rate;
                    let adjacent = space.adjacent(i, j);
                    if adjacent {
                        adjacent_step_sum += mass;
                    }
                    let mut used = 0.0f64;
                    if adjacent {
                        // exchange move
                        next[j * n + i] += share;
                        used += share;
                    }
                    // first walker moves, excluding a collision with the
                    // second (only possible when adjacent)
                    let mut first_moves = 0usize;
                    for k in space.ball.neighbors_of(i) {
                        if k != j {
                            next[k * n + j] += share;
                            used += share;
                            first_moves += 1;
                        }
                    }
                    let mut second_moves = 0usize;
                    for k in space.ball.neighbors_of(j) {
                        if k != i {
                            next[i * n + k] += share;
                            used += share;
                            second_moves += 1;
                        }
                    }
                    match mode {
                        BoundaryMode::Closed => {
                            // remaining rate stays put
                            next[i * n + j] += mass - used;
                        }
                        BoundaryMode::Absorbing => {
                            // On the infinite tree each walker has d + 1
                            // moves (minus exclusions); the missing ones
                            // exit the ball.
                            let d1 = space.ball.d() as usize + 1;
                            let tree_first = if adjacent { d1 - 1 } else { d1 };
                            let tree_second = if adjacent { d1 - 1 } else { d1 };
                            let exiting =
                                (tree_first - first_moves) + (tree_second - second_moves);
                            dropped_total += share * exiting as f64;
                            let tree_used =
                                share * ((tree_first + tree_second + usize::from(adjacent)) as f64);
                            next[i * n + j] += mass - tree_used;
                        }
                    }
                }
            }
            std::mem::swap(&mut v, &mut next);
        }
    }
    let leak = window.tail + dropped_total;
    if leak > tol {
        return Err(Error::Truncation {
            requested: tol,
            achieved: leak,
        });
    }
    let mut probabilities = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            let q = acc[i * n + j];
            if q > 0.0 {
                debug_assert!(i != j, "pair walk must avoid the diagonal");
                probabilities.insert((i, j), q);
            }
        }
    }
    let interaction_bound = 2.0 * (adjacent_step_sum / rate + t * window.tail);
    Ok(PairKernelRow {
        source,
        t,
        probabilities,
        leak,
        interaction_bound,
    })
}

/// The exact pair-walk jump rate `Q((x, z), (y, w))` from the rate table.
pub fn pair_rate(ball: &Ball, from: PairState, to: PairState) -> f64 {
    if from.0 == from.1 || to.0 == to.1 || from == to {
        return 0.0;
    }
    let space = PairSpace { ball, n: ball.len() };
    let adjacent = space.adjacent(from.0, from.1);
    let first_neighbor = space.adjacent(from.0, to.0);
    let second_neighbor = space.adjacent(from.1, to.1);
    if adjacent && to == (from.1, from.0) {
        return 1.0; // position exchange
    }
    if to.1 == from.1 && first_neighbor && to.0 != from.1 {
        return 1.0;
    }
    if to.0 == from.0 && second_neighbor && to.1 != from.0 {
        return 1.0;
    }
    0.0
}

/// One-point duality value against the infinite-tree kernel:
/// `sum_z p_t(x, z) h1(eta(z))` over the ball, with the kernel mass beyond
/// the ball reported as `leak`. The true infinite-tree expectation (for any
/// exterior extension of `eta`) differs by at most `leak * max |h1|`.
pub fn one_point_expectation(
    ball: &Ball,
    eta: &Configuration,
    x: usize,
    t: f64,
    h1: &dyn Fn(u8) -> f64,
    leak_tol: f64,
) -> Result<(f64, f64)> {
    let kernel = radial_distribution::<f64>(ball.d(), t, None, 1e-13)?;
    let mut value = 0.0;
    let mut covered = 0.0;
    for z in 0..ball.len() {
        let p = kernel.kernel_at(ball.dist(x, z));
        covered += p;
        value += p * h1(eta.occupancy(z));
    }
    let leak = (1.0 - covered).max(0.0) + kernel.leak;
    if leak > leak_tol {
        return Err(Error::Truncation {
            requested: leak_tol,
            achieved: leak,
        });
    }
    Ok((value, leak))
}

/// One-point duality value for the closed ball itself, exact up to the
/// uniformization tolerance: `sum_z p^ball_t(x, z) h1(eta(z))`.
pub fn one_point_ball(
    ball: &Ball,
    eta: &Configuration,
    x: usize,
    t: f64,
    h1: &dyn Fn(u8) -> f64,
    tol: f64,
) -> f64 {
    let dist = exact::ball_walk_distribution(ball, x, t, tol);
    (0..ball.len())
        .map(|z| dist[z] * h1(eta.occupancy(z)))
        .sum()
}

/// Two-point duality value `sum_{(z,w)} q_t((x,y),(z,w)) h2(eta(z), eta(w))`.
pub fn two_point_expectation(
    ball: &Ball,
    eta: &Configuration,
    x: usize,
    y: usize,
    t: f64,
    h2: &dyn Fn(u8, u8) -> f64,
    mode: BoundaryMode,
    tol: f64,
) -> Result<(f64, f64)> {
    if x == y {
        return Err(Error::Domain("two-point duality needs distinct vertices".into()));
    }
    let row = pair_kernel(ball, (x, y), t, mode, tol)?;
    let mut value = 0.0;
    for (&(z, w), &q) in &row.probabilities {
        value += q * h2(eta.occupancy(z), eta.occupancy(w));
    }
    Ok((value, row.leak))
}

/// Parameters of the three-way duality verification.
#[derive(Debug, Clone)]
pub struct DualityParams {
    pub d: u32,
    pub radius: u32,
    pub t: f64,
    pub p: f64,
    pub replicas: u32,
    pub seed: u64,
    /// Oracle-vs-exact tolerance.
    pub exact_tol: f64,
    /// Monte Carlo z-score for the pass band.
    pub z: f64,
}

impl Default for DualityParams {
    fn default() -> Self {
        DualityParams {
            d: 2,
            radius: 2,
            t: 0.5,
            p: 0.5,
            replicas: 10_000,
            seed: 1,
            exact_tol: 1e-8,
            z: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityCheck {
    pub test: String,
    pub method_values: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub checks: Vec<DualityCheck>,
    pub pass: bool,
}

/// Run the three-way comparison: Monte Carlo simulator expectation vs the
/// duality-oracle value vs exact generator exponentiation.
pub fn verify_duality(params: &DualityParams) -> Result<DualityReport> {
    let ball = crate::tree::build_ball(params.d, params.radius)?;
    if ball.len() > exact::MAX_EXACT_VERTICES {
        return Err(Error::StateSpaceTooLarge {
            states: 1u64 << ball.len(),
            cap: 1u64 << exact::MAX_EXACT_VERTICES,
        });
    }
    let eta0 = ssep::sample_initial(&ball, params.p, params.seed)?;
    let x = 0usize;
    let y = 1usize; // first child of the origin: adjacent targets
    let exact_dist = exact::exclusion_distribution(&ball, eta0.as_mask(), params.t, 1e-13)?;
    let bit = |s: usize, v: usize| ((s >> v) & 1) as f64;
    let exact_one: f64 = exact_dist
        .iter()
        .enumerate()
        .map(|(s, &m)| m * bit(s, x))
        .sum();
    let exact_two: f64 = exact_dist
        .iter()
        .enumerate()
        .map(|(s, &m)| m * bit(s, x) * bit(s, y))
        .sum();

    let oracle_one = one_point_ball(&ball, &eta0, x, params.t, &|b| f64::from(b), 1e-13);
    let (oracle_two, _) = two_point_expectation(
        &ball,
        &eta0,
        x,
        y,
        params.t,
        &|a, b| f64::from(a) * f64::from(b),
        BoundaryMode::Closed,
        1e-12,
    )?;

    // Monte Carlo arm: the actual event-driven simulator from the same
    // fixed initial configuration.
    let n = params.replicas;
    let mut sum_one = 0.0f64;
    let mut sum_two = 0.0f64;
    let mut sumsq_one = 0.0f64;
    let mut sumsq_two = 0.0f64;
    for r in 0..n {
        let mut rng = ssep::replica_rng(params.seed, u64::from(r), ssep::PHASE_DYNAMICS);
        let out = ssep::simulate(&ball, &eta0, params.t, &[], params.p, &mut rng, None, false)?;
        let one = f64::from(out.final_config.occupancy(x));
        let two = one * f64::from(out.final_config.occupancy(y));
        sum_one += one;
        sum_two += two;
        sumsq_one += one * one;
        sumsq_two += two * two;
    }
    let nf = f64::from(n);
    let mc_one = sum_one / nf;
    let mc_two = sum_two / nf;
    let se_one = ((sumsq_one / nf - mc_one * mc_one).max(0.0) / (nf - 1.0)).sqrt();
    let se_two = ((sumsq_two / nf - mc_two * mc_two).max(0.0) / (nf - 1.0)).sqrt();

    let mut checks = Vec::new();
    for (label, exact_v, oracle_v, mc_v, se) in [
        ("one-point", exact_one, oracle_one, mc_one, se_one),
        ("two-point", exact_two, oracle_two, mc_two, se_two),
    ] {
        let mut method_values = BTreeMap::new();
        method_values.insert("exact".into(), exact_v);
        method_values.insert("dual_oracle".into(), oracle_v);
        method_values.insert("monte_carlo".into(), mc_v);
        method_values.insert("monte_carlo_se".into(), se);
        let mut tolerances = BTreeMap::new();
        tolerances.insert("oracle_vs_exact".into(), params.exact_tol);
        tolerances.insert("mc_z".into(), params.z);
        let pass = (oracle_v - exact_v).abs() <= params.exact_tol
            && (mc_v - exact_v).abs() <= params.z * se + 1e-12;
        checks.push(DualityCheck {
            test: label.into(),
            method_values,
            tolerances,
            pass,
        });
    }

    // Degenerate observable: every method returns the constant exactly.
    let constant = 0.625f64;
    let oracle_const = one_point_ball(&ball, &eta0, x, params.t, &|_| constant, 1e-13);
    let (pair_const, _) = two_point_expectation(
        &ball,
        &eta0,
        x,
        y,
        params.t,
        &|_, _| constant,
        BoundaryMode::Closed,
        1e-12,
    )?;
    let exact_const: f64 = exact_dist.iter().sum::<f64>() * constant;
    let mut method_values = BTreeMap::new();
    method_values.insert("exact".into(), exact_const);
    method_values.insert("dual_oracle_one".into(), oracle_const);
    method_values.insert("dual_oracle_two".into(), pair_const);
    let mut tolerances = BTreeMap::new();
    tolerances.insert("oracle_vs_exact".into(), params.exact_tol);
    let pass = (oracle_const - constant).abs() <= params.exact_tol
        && (pair_const - constant).abs() <= params.exact_tol;
    checks.push(DualityCheck {
        test: "constant-observable".into(),
        method_values,
        tolerances,
        pass,
    });

    let pass = checks.iter().all(|c| c.pass);
    Ok(DualityReport { checks, pass })
}
