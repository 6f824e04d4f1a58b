//! Event-driven stirring dynamics of the exclusion process on a finite ball.
//!
//! Every undirected edge carries an independent rate-1 exponential clock; at
//! each ring the two endpoint occupancies swap. This is equal in law to the
//! exclusion dynamics and keeps the jump structure branch-free. Occupation
//! times are accumulated exactly (piecewise constant between events), never
//! time-stepped. Tilted dynamics multiply each edge rate by the exponential
//! of the occupancy-weighted resolvent-field difference and are sampled by
//! thinning against the static per-edge bound `exp(|delta_e|)`; the
//! Radon-Nikodym log-weight is accumulated exactly as jump terms minus the
//! time integral of the compensator.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::rate::ScalingSchedule;
use crate::tree::Ball;

/// Cap on recorded events per trajectory.
pub const EVENT_CAP: usize = 20_000_000;

/// Occupancy configuration on a ball, with the particle count cached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    occ: Vec<u8>,
    particles: usize,
}

impl Configuration {
    pub fn from_bits(ball: &Ball, occ: Vec<u8>) -> Result<Self> {
        if occ.len() != ball.len() {
            return Err(Error::Config(format!(
                "configuration has {} sites, ball has {}",
                occ.len(),
                ball.len()
            )));
        }
        if occ.iter().any(|&b| b > 1) {
            return Err(Error::Config("occupancies must be 0 or 1".into()));
        }
        let particles = occ.iter().map(|&b| b as usize).sum();
        Ok(Configuration { occ, particles })
    }

    pub fn occupancy(&self, i: usize) -> u8 {
        self.occ[i]
    }

    pub fn occupancies(&self) -> &[u8] {
        &self.occ
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.occ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occ.is_empty()
    }

    /// Bitmask view for exact small-space comparisons.
    pub fn as_mask(&self) -> u32 {
        assert!(self.occ.len() <= 32);
        self.occ
            .iter()
            .enumerate()
            .fold(0u32, |m, (i, &b)| m | (u32::from(b) << i))
    }

    #[inline]
    fn swap_edge(&mut self, ball: &Ball, e: usize) {
        let (a, b) = ball.edge(e);
        self.occ.swap(a, b);
        debug_assert!(self.occ[a] <= 1 && self.occ[b] <= 1);
    }

    /// The configuration with edge `e` swapped (for generator evaluations).
    pub fn swapped(&self, ball: &Ball, e: usize) -> Configuration {
        let mut c = self.clone();
        c.swap_edge(ball, e);
        c
    }
}

/// One executed swap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub edge: u32,
}

/// A realized path of the dynamics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial: Configuration,
    pub events: Vec<Event>,
    pub final_config: Configuration,
    pub horizon: f64,
}

impl Trajectory {
    /// Replay the event list from the initial configuration.
    pub fn replay(&self, ball: &Ball) -> Configuration {
        let mut c = self.initial.clone();
        for ev in &self.events {
            c.swap_edge(ball, ev.edge as usize);
        }
        c
    }
}

/// Per-target occupation-time accumulators along one trajectory.
#[derive(Debug, Clone)]
pub struct OccupationLedger {
    pub targets: Vec<usize>,
    /// Raw occupation times `X_t` per target, in `[0, t]`.
    pub occupation: Vec<f64>,
    pub horizon: f64,
    pub p: f64,
    /// Log of the Radon-Nikodym density of the tilted path measure;
    /// zero for untilted runs.
    pub log_weight: f64,
}

impl OccupationLedger {
    /// Centered occupation time `xi_t = X_t - p t` for target `i`.
    pub fn xi(&self, i: usize) -> f64 {
        self.occupation[i] - self.p * self.horizon
    }

    pub fn xi_vector(&self) -> Vec<f64> {
        (0..self.targets.len()).map(|i| self.xi(i)).collect()
    }

    /// Importance weight restoring untilted expectations.
    pub fn importance_weight(&self) -> f64 {
        (-self.log_weight).exp()
    }
}

/// Derive the replica-scoped random stream `(master_seed, replica, phase)`.
/// ChaCha streams keep replicas independent and reproducible regardless of
/// scheduling.
pub fn replica_rng(master_seed: u64, replica: u64, phase: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica.wrapping_mul(4).wrapping_add(phase));
    rng
}

/// Phase tags for [`replica_rng`].
pub const PHASE_INIT: u64 = 0;
pub const PHASE_DYNAMICS: u64 = 1;

/// Product-measure initial configuration: independent Bernoulli(p) per
/// vertex from the seeded stream.
pub fn sample_initial(ball: &Ball, p: f64, seed: u64) -> Result<Configuration> {
    let mut rng = replica_rng(seed, 0, PHASE_INIT);
    sample_initial_from(ball, p, &mut rng)
}

pub fn sample_initial_from(ball: &Ball, p: f64, rng: &mut ChaCha8Rng) -> Result<Configuration> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "density p={p} must lie strictly inside (0, 1)"
        )));
    }
    let occ: Vec<u8> = (0..ball.len())
        .map(|_| u8::from(rng.gen::<f64>() < p))
        .collect();
    Configuration::from_bits(ball, occ)
}

/// Static tilt data for one run: per-edge potential differences and the
/// thinning bound.
pub struct Tilt {
    /// `delta_e = (a_t / t) * sum_j c_j (g_j(a) - g_j(b))` per edge.
    delta: Vec<f64>,
    exp_pos: Vec<f64>,
    exp_neg: Vec<f64>,
    /// Thinning bound per edge: `exp(|delta_e|)`.
    bound: Vec<f64>,
    total_bound: f64,
    alias: AliasTable,
}

/// Largest admissible |delta| before the rate guard trips.
const MAX_TILT_EXPONENT: f64 = 30.0;

/// Build the tilt for centers `targets` with coefficients `c`; `fields[j]`
/// is the resolvent field of target `j` evaluated on every ball vertex.
pub fn build_tilt(
    ball: &Ball,
    c: &[f64],
    fields: &[Vec<f64>],
    schedule: &ScalingSchedule,
    t: f64,
) -> Result<Tilt> {
    if c.len() != fields.len() {
        return Err(Error::Config(format!(
            "{} tilt coefficients but {} resolvent fields",
            c.len(),
            fields.len()
        )));
    }
    for f in fields {
        if f.len() != ball.len() {
            return Err(Error::Config("resolvent field does not cover the ball".into()));
        }
    }
    let kappa = schedule.kappa(t);
    let edges = ball.num_edges();
    let mut delta = vec![0.0f64; edges];
    for e in 0..edges {
        let (a, b) = ball.edge(e);
        let mut s = 0.0;
        for (cj, field) in c.iter().zip(fields) {
            s += cj * (field[a] - field[b]);
        }
        delta[e] = kappa * s;
    }
    let worst = delta.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
    if worst > MAX_TILT_EXPONENT {
        return Err(Error::Config(format!(
            "tilt too strong: max |delta| = {worst:.3} exceeds {MAX_TILT_EXPONENT}; \
             reduce |c| or the schedule strength a_t / t"
        )));
    }
    let exp_pos: Vec<f64> = delta.iter().map(|&d| d.exp()).collect();
    let exp_neg: Vec<f64> = delta.iter().map(|&d| (-d).exp()).collect();
    let bound: Vec<f64> = delta.iter().map(|&d| d.abs().exp()).collect();
    let total_bound: f64 = bound.iter().sum();
    let alias = AliasTable::new(&bound);
    Ok(Tilt {
        delta,
        exp_pos,
        exp_neg,
        bound,
        total_bound,
        alias,
    })
}

impl Tilt {
    pub fn is_trivial(&self) -> bool {
        self.delta.iter().all(|&d| d == 0.0)
    }

    /// Current rate factor of edge `e` given endpoint occupancies.
    #[inline]
    fn rate(&self, e: usize, occ_a: u8, occ_b: u8) -> f64 {
        match i16::from(occ_b) - i16::from(occ_a) {
            1 => self.exp_pos[e],
            -1 => self.exp_neg[e],
            _ => 1.0,
        }
    }

    /// Exact log rate factor (the jump contribution to the log-weight).
    #[inline]
    fn log_rate(&self, e: usize, occ_a: u8, occ_b: u8) -> f64 {
        f64::from(i16::from(occ_b) - i16::from(occ_a)) * self.delta[e]
    }
}

/// Walker alias table for O(1) categorical sampling.
struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        let mut prob = vec![0.0f64; n];
        let mut alias = vec![0u32; n];
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut small: Vec<usize> = Vec::with_capacity(n);
        let mut large: Vec<usize> = Vec::with_capacity(n);
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for &i in small.iter().chain(large.iter()) {
            prob[i] = 1.0;
        }
        AliasTable { prob, alias }
    }

    #[inline]
    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let i = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}

struct TargetTracker {
    indices: Vec<usize>,
    lookup: Vec<i32>,
    occ_now: Vec<f64>,
    accum: Vec<f64>,
}

impl TargetTracker {
    fn new(ball: &Ball, targets: &[usize], config: &Configuration) -> Result<Self> {
        let mut lookup = vec![-1i32; ball.len()];
        for (ti, &v) in targets.iter().enumerate() {
            if v >= ball.len() {
                return Err(Error::Config(format!("target index {v} outside the ball")));
            }
            lookup[v] = ti as i32;
        }
        Ok(TargetTracker {
            indices: targets.to_vec(),
            lookup,
            occ_now: targets.iter().map(|&v| f64::from(config.occupancy(v))).collect(),
            accum: vec![0.0; targets.len()],
        })
    }

    #[inline]
    fn advance(&mut self, dt: f64) {
        for (acc, occ) in self.accum.iter_mut().zip(&self.occ_now) {
            *acc += occ * dt;
        }
    }

    #[inline]
    fn refresh_vertex(&mut self, v: usize, config: &Configuration) {
        let ti = self.lookup[v];
        if ti >= 0 {
            self.occ_now[ti as usize] = f64::from(config.occupancy(v));
        }
    }
}

pub struct SimOutput {
    pub final_config: Configuration,
    pub events: Option<Vec<Event>>,
    pub ledger: OccupationLedger,
}

/// Core event loop. With `tilt = None` this is the plain stirring dynamics;
/// a trivial (all-zero) tilt delegates to the same code path so that `c = 0`
/// reproduces the untilted trajectory bit for bit.
pub fn simulate(
    ball: &Ball,
    initial: &Configuration,
    t: f64,
    targets: &[usize],
    p: f64,
    rng: &mut ChaCha8Rng,
    tilt: Option<&Tilt>,
    record_events: bool,
) -> Result<SimOutput> {
    if t < 0.0 {
        return Err(Error::Domain("horizon t must be >= 0".into()));
    }
    let mut config = initial.clone();
    let mut tracker = TargetTracker::new(ball, targets, &config)?;
    let mut events: Vec<Event> = Vec::new();
    let edges = ball.num_edges();
    let tilt = tilt.filter(|tl| !tl.is_trivial());
    let mut log_weight = 0.0f64;

    if edges > 0 && t > 0.0 {
        match tilt {
            None => {
                let rate = edges as f64;
                let mut time = 0.0f64;
                loop {
                    let dt: f64 = rng.sample::<f64, _>(Exp1) / rate;
                    if time + dt >= t {
                        tracker.advance(t - time);
                        break;
                    }
                    tracker.advance(dt);
                    time += dt;
                    let e = rng.gen_range(0..edges);
                    config.swap_edge(ball, e);
                    let (a, b) = ball.edge(e);
                    tracker.refresh_vertex(a, &config);
                    tracker.refresh_vertex(b, &config);
                    if record_events {
                        if events.len() >= EVENT_CAP {
                            return Err(Error::Config(format!(
                                "event cap {EVENT_CAP} exceeded; shrink t or the ball"
                            )));
                        }
                        events.push(Event {
                            time,
                            edge: e as u32,
                        });
                    }
                }
            }
            Some(tl) => {
                // Current per-edge rate factors and their running total.
                let mut rates: Vec<f64> = (0..edges)
                    .map(|e| {
                        let (a, b) = ball.edge(e);
                        tl.rate(e, config.occupancy(a), config.occupancy(b))
                    })
                    .collect();
                let mut total_rate: f64 = rates.iter().sum();
                let mut compensator = 0.0f64;
                let mut jump_sum = 0.0f64;
                let mut time = 0.0f64;
                let mut proposals: u64 = 0;
                loop {
                    let dt: f64 = rng.sample::<f64, _>(Exp1) / tl.total_bound;
                    if time + dt >= t {
                        let rest = t - time;
                        tracker.advance(rest);
                        compensator += (total_rate - edges as f64) * rest;
                        break;
                    }
                    tracker.advance(dt);
                    compensator += (total_rate - edges as f64) * dt;
                    time += dt;
                    proposals += 1;
                    let e = tl.alias.sample(rng);
                    // Thinning: accept with probability rate / bound.
                    let accept = if tl.bound[e] == 1.0 {
                        true
                    } else {
                        rng.gen::<f64>() * tl.bound[e] < rates[e]
                    };
                    if accept {
                        let (a, b) = ball.edge(e);
                        jump_sum += tl.log_rate(e, config.occupancy(a), config.occupancy(b));
                        config.swap_edge(ball, e);
                        tracker.refresh_vertex(a, &config);
                        tracker.refresh_vertex(b, &config);
                        for &f in ball.incident_edges(a) {
                            let f = f as usize;
                            let (fa, fb) = ball.edge(f);
                            let fresh = tl.rate(f, config.occupancy(fa), config.occupancy(fb));
                            total_rate += fresh - rates[f];
                            rates[f] = fresh;
                        }
                        for &f in ball.incident_edges(b) {
                            let f = f as usize;
                            let (fa, fb) = ball.edge(f);
                            let fresh = tl.rate(f, config.occupancy(fa), config.occupancy(fb));
                            total_rate += fresh - rates[f];
                            rates[f] = fresh;
                        }
                        if record_events {
                            if events.len() >= EVENT_CAP {
                                return Err(Error::Config(format!(
                                    "event cap {EVENT_CAP} exceeded; shrink t or the ball"
                                )));
                            }
                            events.push(Event {
                                time,
                                edge: e as u32,
                            });
                        }
                    }
                    // Kill accumulated floating-point drift in the total.
                    if proposals % (1 << 22) == 0 {
                        total_rate = rates.iter().sum();
                    }
                }
                log_weight = jump_sum - compensator;
            }
        }
    } else {
        tracker.advance(t);
    }

    debug_assert_eq!(
        config.occupancies().iter().map(|&b| b as usize).sum::<usize>(),
        initial.particles(),
        "stirring must conserve the particle count"
    );
    let ledger = OccupationLedger {
        targets: tracker.indices,
        occupation: tracker.accum,
        horizon: t,
        p,
        log_weight,
    };
    Ok(SimOutput {
        final_config: config,
        events: record_events.then_some(events),
        ledger,
    })
}

/// Plain stirring run from a fixed initial configuration, recording events.
pub fn run(
    ball: &Ball,
    initial: &Configuration,
    t: f64,
    targets: &[usize],
    p: f64,
    seed: u64,
) -> Result<(Trajectory, OccupationLedger)> {
    let mut rng = replica_rng(seed, 0, PHASE_DYNAMICS);
    let out = simulate(ball, initial, t, targets, p, &mut rng, None, true)?;
    Ok((
        Trajectory {
            initial: initial.clone(),
            events: out.events.unwrap(),
            final_config: out.final_config,
            horizon: t,
        },
        out.ledger,
    ))
}

/// Tilted run: edge `(a, b)` swaps at rate
/// `exp{(a_t/t) (eta(b) - eta(a)) sum_j c_j (g_j(a) - g_j(b))}`, and the
/// ledger carries the exact log density of the tilted path measure.
#[allow(clippy::too_many_arguments)]
pub fn tilted_run(
    ball: &Ball,
    initial: &Configuration,
    t: f64,
    targets: &[usize],
    p: f64,
    c: &[f64],
    schedule: &ScalingSchedule,
    fields: &[Vec<f64>],
    seed: u64,
) -> Result<(Trajectory, OccupationLedger)> {
    let tilt = build_tilt(ball, c, fields, schedule, t)?;
    let mut rng = replica_rng(seed, 0, PHASE_DYNAMICS);
    let out = simulate(ball, initial, t, targets, p, &mut rng, Some(&tilt), true)?;
    Ok((
        Trajectory {
            initial: initial.clone(),
            events: out.events.unwrap(),
            final_config: out.final_config,
            horizon: t,
        },
        out.ledger,
    ))
}

/// Apply the exclusion generator to an observable:
/// `(Lf)(eta) = sum over unordered edges of f(eta^e) - f(eta)`.
pub fn apply_generator(
    ball: &Ball,
    f: &mut dyn FnMut(&Configuration) -> f64,
    eta: &Configuration,
) -> f64 {
    let base = f(eta);
    let mut work = eta.clone();
    let mut acc = 0.0;
    for e in 0..ball.num_edges() {
        work.swap_edge(ball, e);
        acc += f(&work) - base;
        work.swap_edge(ball, e);
    }
    acc
}

/// How to evaluate the Dirichlet form.
pub enum DirichletMode {
    /// Full enumeration of the configuration space (<= 16 vertices).
    Exact,
    /// Product-measure Monte Carlo with a standard error.
    MonteCarlo { samples: u32, seed: u64 },
}

pub struct DirichletEstimate {
    pub value: f64,
    pub standard_error: Option<f64>,
}

/// Dirichlet form `D(f) = 1/4 E_nu sum over ordered adjacent pairs of
/// (f(eta^{x,y}) - f(eta))^2`.
pub fn dirichlet_form(
    ball: &Ball,
    p: f64,
    f: &mut dyn FnMut(&Configuration) -> f64,
    mode: DirichletMode,
) -> Result<DirichletEstimate> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain("density p must lie strictly inside (0, 1)".into()));
    }
    let inner = |config: &Configuration, f: &mut dyn FnMut(&Configuration) -> f64| -> f64 {
        let base = f(config);
        let mut work = config.clone();
        let mut acc = 0.0;
        for e in 0..ball.num_edges() {
            work.swap_edge(ball, e);
            let diff = f(&work) - base;
            work.swap_edge(ball, e);
            // ordered pairs count each edge twice
            acc += 2.0 * diff * diff;
        }
        acc / 4.0
    };
    match mode {
        DirichletMode::Exact => {
            let n = ball.len();
            if n > crate::exact::MAX_EXACT_VERTICES {
                return Err(Error::StateSpaceTooLarge {
                    states: 1u64 << n,
                    cap: 1u64 << crate::exact::MAX_EXACT_VERTICES,
                });
            }
            let mut total = 0.0;
            for mask in 0u32..(1u32 << n) {
                let bits: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
                let config = Configuration::from_bits(ball, bits)?;
                let weight = crate::exact::product_weight(n, mask, p);
                total += weight * inner(&config, f);
            }
            Ok(DirichletEstimate {
                value: total,
                standard_error: None,
            })
        }
        DirichletMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::Config("Monte Carlo mode needs at least 2 samples".into()));
            }
            let mut rng = replica_rng(seed, 0, PHASE_INIT);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..samples {
                let config = sample_initial_from(ball, p, &mut rng)?;
                let v = inner(&config, f);
                sum += v;
                sum_sq += v * v;
            }
            let n = f64::from(samples);
            let mean = sum / n;
            let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
            Ok(DirichletEstimate {
                value: mean,
                standard_error: Some((var / n).sqrt()),
            })
        }
    }
}

/// Sampled path of the compensated martingale built from the resolvent
/// observable `G(eta) = sum_y (eta(y) - p) g(y)`:
/// `M_s = G(eta_s) - G(eta_0) - int_0^s [G(eta_u)/sqrt(t) - (eta_u(x) - p)] du`.
#[derive(Debug, Clone)]
pub struct MartingalePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub final_value: f64,
    /// `int_0^t G(eta_u) du` along the path.
    pub integral_g: f64,
    pub g_initial: f64,
    pub g_final: f64,
    /// `xi_t` of the target, accumulated along the same path.
    pub xi: f64,
}

/// Evaluate the martingale diagnostic along a recorded trajectory. `field`
/// is the resolvent field of the target vertex `x` on the ball and `t` the
/// resolvent horizon (the integrand uses `1/sqrt(t)`).
pub fn martingale_path(
    ball: &Ball,
    traj: &Trajectory,
    field: &[f64],
    x: usize,
    p: f64,
    t: f64,
) -> MartingalePath {
    assert_eq!(field.len(), ball.len());
    let lambda = 1.0 / t.sqrt();
    let mut config = traj.initial.clone();
    let mut g: f64 = (0..ball.len())
        .map(|i| (f64::from(config.occupancy(i)) - p) * field[i])
        .sum();
    let g_initial = g;
    let mut integral_g = 0.0f64;
    let mut integral_occ = 0.0f64; // int (eta_u(x) - p) du
    let mut time = 0.0f64;
    let mut times = Vec::with_capacity(traj.events.len());
    let mut values = Vec::with_capacity(traj.events.len());
    for ev in &traj.events {
        let dt = ev.time - time;
        integral_g += g * dt;
        integral_occ += (f64::from(config.occupancy(x)) - p) * dt;
        time = ev.time;
        let (a, b) = ball.edge(ev.edge as usize);
        let (oa, ob) = (config.occupancy(a), config.occupancy(b));
        g += (f64::from(ob) - f64::from(oa)) * (field[a] - field[b]);
        config.swap_edge(ball, ev.edge as usize);
        times.push(time);
        values.push(g - g_initial - (lambda * integral_g - integral_occ));
    }
    let dt = traj.horizon - time;
    integral_g += g * dt;
    integral_occ += (f64::from(config.occupancy(x)) - p) * dt;
    let final_value = g - g_initial - (lambda * integral_g - integral_occ);
    MartingalePath {
        times,
        values,
        final_value,
        integral_g,
        g_initial,
        g_final: g,
        xi: integral_occ,
    }
}

/// Time-averaged fluctuation of squared edge gradients around their
/// product-measure mean, weighted by the product of two resolvent-field
/// gradients:
/// `(1/t) int_0^t sum_y sum_{z~y} [(eta_u(z)-eta_u(y))^2 - 2p(1-p)]
///  (g_x(y)-g_x(z)) (g_w(y)-g_w(z)) du`,
/// maintained incrementally (a swap touches only incident edges).
pub fn edge_fluctuation_diag(
    ball: &Ball,
    traj: &Trajectory,
    field_x: &[f64],
    field_w: &[f64],
    p: f64,
) -> f64 {
    let edges = ball.num_edges();
    let weights: Vec<f64> = (0..edges)
        .map(|e| {
            let (a, b) = ball.edge(e);
            (field_x[a] - field_x[b]) * (field_w[a] - field_w[b])
        })
        .collect();
    let total_weight: f64 = weights.iter().sum();
    let mut config = traj.initial.clone();
    let diff_sum = |config: &Configuration, e: usize| -> f64 {
        let (a, b) = ball.edge(e);
        if config.occupancy(a) != config.occupancy(b) {
            weights[e]
        } else {
            0.0
        }
    };
    let mut active: f64 = (0..edges).map(|e| diff_sum(&config, e)).sum();
    let mut integral = 0.0f64;
    let mut time = 0.0f64;
    for ev in &traj.events {
        integral += active * (ev.time - time);
        time = ev.time;
        let e = ev.edge as usize;
        let (a, b) = ball.edge(e);
        for &f in ball.incident_edges(a).iter().chain(ball.incident_edges(b)) {
            active -= diff_sum(&config, f as usize);
        }
        config.swap_edge(ball, e);
        for &f in ball.incident_edges(a).iter().chain(ball.incident_edges(b)) {
            active += diff_sum(&config, f as usize);
        }
    }
    integral += active * (traj.horizon - time);
    // Ordered pairs double the undirected edge sums.
    2.0 * (integral - 2.0 * p * (1.0 - p) * total_weight * traj.horizon) / traj.horizon
}
