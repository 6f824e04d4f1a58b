//! Exact finite-state oracles: the walk kernel on an enumerated ball and the
//! full exclusion-process semigroup on configuration spaces small enough to
//! enumerate. These are the reference values the duality and reversibility
//! checks compare against.

use crate::error::{Error, Result};
use crate::kernel::poisson_window;
use crate::tree::Ball;

/// Hard cap on enumerable configuration spaces (2^16 states).
pub const MAX_EXACT_VERTICES: usize = 16;

/// Law of the ball walk at time `t` started from `from`, by uniformization.
/// The ball is closed: boundary vertices simply have fewer moves.
pub fn ball_walk_distribution(ball: &Ball, from: usize, t: f64, tol: f64) -> Vec<f64> {
    let n = ball.len();
    let rate = f64::from(ball.d()) + 1.0;
    let window = poisson_window(rate * t, tol);
    let steps = window.weights.len() - 1;
    let mut v = vec![0.0f64; n];
    v[from] = 1.0;
    let mut acc = vec![0.0f64; n];
    let mut next = vec![0.0f64; n];
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
                let mass = v[i];
                if mass == 0.0 {
                    continue;
                }
                let deg = ball.degree(i) as f64;
                next[i] += mass * (rate - deg) / rate;
                let share = mass / rate;
                if let Some(p) = ball.parent_of(i) {
                    next[p] += share;
                }
                for &c in ball.children_of(i) {
                    next[c as usize] += share;
                }
            }
            std::mem::swap(&mut v, &mut next);
        }
    }
    acc
}

/// Apply the stirring swap of edge `e` to a configuration bitmask.
#[inline]
pub fn swap_mask(ball: &Ball, state: u32, e: usize) -> u32 {
    let (a, b) = ball.edge(e);
    let bit_a = (state >> a) & 1;
    let bit_b = (state >> b) & 1;
    if bit_a != bit_b {
        state ^ ((1 << a) | (1 << b))
    } else {
        state
    }
}

fn check_enumerable(ball: &Ball) -> Result<usize> {
    let n = ball.len();
    if n > MAX_EXACT_VERTICES {
        return Err(Error::StateSpaceTooLarge {
            states: 1u64 << n,
            cap: 1u64 << MAX_EXACT_VERTICES,
        });
    }
    Ok(n)
}

/// Exact law of the exclusion process on the ball at time `t`, as a vector
/// over all `2^n` occupation bitmasks, starting from `initial`.
pub fn exclusion_distribution(ball: &Ball, initial: u32, t: f64, tol: f64) -> Result<Vec<f64>> {
    let n = check_enumerable(ball)?;
    let states = 1usize << n;
    let edges = ball.num_edges();
    let rate = edges as f64;
    let mut v = vec![0.0f64; states];
    v[initial as usize] = 1.0;
    if edges == 0 || t == 0.0 {
        return Ok(v);
    }
    let window = poisson_window(rate * t, tol);
    let steps = window.weights.len() - 1;
    let mut acc = vec![0.0f64; states];
    let mut next = vec![0.0f64; states];
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
            for (s, &mass) in v.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                let share = mass / rate;
                for e in 0..edges {
                    next[swap_mask(ball, s as u32, e) as usize] += share;
                }
            }
            std::mem::swap(&mut v, &mut next);
        }
    }
    Ok(acc)
}

/// Apply the exclusion generator to a function given as a value per bitmask:
/// `(Lf)(s) = sum over edges of f(swap(s)) - f(s)`.
pub fn generator_apply(ball: &Ball, f: &[f64]) -> Result<Vec<f64>> {
    let n = check_enumerable(ball)?;
    let states = 1usize << n;
    assert_eq!(f.len(), states);
    let mut out = vec![0.0f64; states];
    for s in 0..states {
        let mut acc = 0.0;
        for e in 0..ball.num_edges() {
            let s2 = swap_mask(ball, s as u32, e) as usize;
            acc += f[s2] - f[s];
        }
        out[s] = acc;
    }
    Ok(out)
}

/// Product-measure weight of a bitmask under density `p`.
pub fn product_weight(n: usize, state: u32, p: f64) -> f64 {
    let ones = state.count_ones() as i32;
    p.powi(ones) * (1.0 - p).powi(n as i32 - ones)
}

/// Maximum detailed-balance violation of the generator with respect to the
/// product measure: `max over (state, edge) of |nu(s) L(s, s') - nu(s') L(s', s)|`.
/// Swaps conserve the particle count, so this is zero up to rounding.
pub fn detailed_balance_max_violation(ball: &Ball, p: f64) -> Result<f64> {
    let n = check_enumerable(ball)?;
    let states = 1usize << n;
    let mut worst = 0.0f64;
    for s in 0..states {
        let nu_s = product_weight(n, s as u32, p);
        for e in 0..ball.num_edges() {
            let s2 = swap_mask(ball, s as u32, e);
            if s2 == s as u32 {
                continue;
            }
            let nu_s2 = product_weight(n, s2, p);
            // Rate 1 in both directions.
            worst = worst.max((nu_s - nu_s2).abs());
        }
    }
    Ok(worst)
}

/// Self-adjointness defect of the generator in L2(nu_p):
/// `|<f, Lg> - <g, Lf>|` for given f, g.
pub fn adjointness_defect(ball: &Ball, p: f64, f: &[f64], g: &[f64]) -> Result<f64> {
    let n = check_enumerable(ball)?;
    let states = 1usize << n;
    let lf = generator_apply(ball, f)?;
    let lg = generator_apply(ball, g)?;
    let mut left = 0.0;
    let mut right = 0.0;
    for s in 0..states {
        let nu = product_weight(n, s as u32, p);
        left += nu * f[s] * lg[s];
        right += nu * g[s] * lf[s];
    }
    Ok((left - right).abs())
}
