//! Transition probabilities of the rate-(d+1) simple random walk on the
//! regular tree, computed through the radial distance chain.
//!
//! Distance-transitivity reduces the walk seen from its starting point to a
//! birth-death chain on distances: `0 -> 1` at rate `d + 1`, and for `k >= 1`
//! up at rate `d`, down at rate `1`. Everything here is computed by
//! uniformization (a Poisson mixture of powers of the embedded discrete
//! kernel), which gives certifiable truncation error: the Poisson tail is
//! bounded by a geometric-ratio argument and the spatial range after `n`
//! discrete steps is at most `n`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tree::sphere_size_f;

/// A finite vector indexed by tree distance `k = 0..len`.
#[derive(Debug, Clone)]
pub struct RadialVector<F>(pub Vec<F>);

impl<F: Scalar> RadialVector<F> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entry at distance `k`, zero beyond the stored range.
    pub fn at(&self, k: usize) -> F {
        self.0.get(k).copied().unwrap_or_else(F::zero)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, F> {
        self.0.iter()
    }
}

/// Poisson(lambda) weights `w_0..=w_hi` with a rigorous bound on the
/// neglected right tail.
pub(crate) struct PoissonWindow {
    pub weights: Vec<f64>,
    pub tail: f64,
}

pub(crate) fn poisson_window(lambda: f64, tol: f64) -> PoissonWindow {
    assert!(lambda >= 0.0 && tol > 0.0);
    if lambda == 0.0 {
        return PoissonWindow {
            weights: vec![1.0],
            tail: 0.0,
        };
    }
    let ln_lambda = lambda.ln();
    let mut ln_fact = 0.0f64;
    let mut weights = Vec::with_capacity(lambda as usize + 64);
    weights.push((-lambda).exp().max(0.0));
    let mut n = 0usize;
    loop {
        // Try to certify the tail beyond the current n.
        if (n as f64) + 2.0 > lambda {
            let ln_next = -lambda + ((n + 1) as f64) * ln_lambda - (ln_fact + ((n + 1) as f64).ln());
            let rho = lambda / ((n + 2) as f64);
            let bound = ln_next.exp() / (1.0 - rho);
            if bound <= tol {
                return PoissonWindow {
                    weights,
                    tail: bound,
                };
            }
        }
        n += 1;
        ln_fact += (n as f64).ln();
        let ln_w = -lambda + (n as f64) * ln_lambda - ln_fact;
        weights.push(if ln_w < -745.0 { 0.0 } else { ln_w.exp() });
        assert!(n < 4_000_000, "poisson window failed to close");
    }
}

/// The radial distance chain of the tree walk.
#[derive(Debug, Clone, Copy)]
pub struct RadialChain {
    pub d: u32,
}

impl RadialChain {
    /// Uniformization constant: the exit rate is `d + 1` from every state.
    pub fn uniformization_rate(&self) -> f64 {
        f64::from(self.d) + 1.0
    }

    /// One step of the embedded discrete kernel, truncated at `cap` states.
    /// Mass stepping past the cap is returned (dropped from the vector).
    fn step<F: Scalar>(&self, v: &[F], out: &mut Vec<F>, cap: usize) -> F {
        let d = F::of(f64::from(self.d));
        let dp1 = F::of(f64::from(self.d) + 1.0);
        out.clear();
        out.resize(v.len().min(cap) + 1, F::zero());
        if out.len() > cap + 1 {
            out.truncate(cap + 1);
        }
        let mut dropped = F::zero();
        for (k, &mass) in v.iter().enumerate() {
            if mass == F::zero() {
                continue;
            }
            if k == 0 {
                out[1] += mass;
            } else {
                let down = mass / dp1;
                let up = mass * d / dp1;
                out[k - 1] += down;
                if k + 1 <= cap {
                    out[k + 1] += up;
                } else {
                    dropped += up;
                }
            }
        }
        while out.len() > 1 && *out.last().unwrap() == F::zero() {
            out.pop();
        }
        dropped
    }
}

/// Law of the distance `D(V_t, x)` with error accounting.
#[derive(Debug, Clone)]
pub struct RadialKernel<F> {
    pub t: F,
    pub d: u32,
    /// `dist.at(k)` is `P(D(V_t, x) = k)`.
    pub dist: RadialVector<F>,
    /// Upper bound on the probability mass not represented in `dist`
    /// (Poisson tail plus any spatially dropped mass).
    pub leak: F,
}

impl<F: Scalar> RadialKernel<F> {
    pub fn total(&self) -> F {
        self.dist.iter().copied().sum()
    }

    /// Point transition probability `p_t(x, y)` for `D(x, y) = k`.
    pub fn kernel_at(&self, k: usize) -> F {
        self.dist.at(k) / F::of(sphere_size_f(self.d, k))
    }
}

/// Distribution of the walk's distance from its start after time `t`,
/// with total numerical error at most `tol`.
///
/// `k_max` optionally truncates the distance range; when it is too small for
/// the requested tolerance this fails with a truncation error rather than
/// returning silently biased values.
pub fn radial_distribution<F: Scalar>(
    d: u32,
    t: F,
    k_max: Option<usize>,
    tol: F,
) -> Result<RadialKernel<F>> {
    if d < 2 {
        return Err(Error::Domain(format!("degree parameter d={d} must be >= 2")));
    }
    let tf = t.as_f64();
    if !(tf >= 0.0) {
        return Err(Error::Domain(format!("time t={tf} must be >= 0")));
    }
    let chain = RadialChain { d };
    let lambda = chain.uniformization_rate() * tf;
    let window = poisson_window(lambda, (tol.as_f64() * 0.5).max(1e-300));
    let steps = window.weights.len() - 1;
    let cap = k_max.unwrap_or(steps).max(1);
    let mut v = vec![F::zero(); 1];
    v[0] = F::one();
    let mut acc = vec![F::zero(); cap + 1];
    let mut scratch: Vec<F> = Vec::new();
    let mut dropped = F::zero();
    for (n, &w) in window.weights.iter().enumerate() {
        let wf = F::of(w);
        for (a, &m) in acc.iter_mut().zip(v.iter()) {
            *a += wf * m;
        }
        if n < steps {
            dropped += chain.step(&v, &mut scratch, cap);
            std::mem::swap(&mut v, &mut scratch);
        }
    }
    while acc.len() > 1 && *acc.last().unwrap() == F::zero() {
        acc.pop();
    }
    let leak = F::of(window.tail) + dropped;
    if leak > tol {
        return Err(Error::Truncation {
            requested: tol.as_f64(),
            achieved: leak.as_f64(),
        });
    }
    Ok(RadialKernel {
        t,
        d,
        dist: RadialVector(acc),
        leak,
    })
}

/// Transition probability `p_t(x, y)` for `D(x, y) = k`, with guaranteed
/// absolute error at most `tol`.
pub fn heat_kernel<F: Scalar>(d: u32, t: F, k: usize, tol: F) -> Result<F> {
    let kernel = radial_distribution(d, t, None, tol)?;
    Ok(kernel.kernel_at(k))
}

/// Closed-form MGF `E exp(-theta * beta(V_t))` of the height chain, the
/// projection of the walk onto a fixed end of the tree: `+1` at rate `d`,
/// `-1` at rate `1`.
pub fn height_mgf<F: Scalar>(d: u32, t: F, theta: F) -> F {
    let df = F::of(f64::from(d));
    (t * (df * ((-theta).exp() - F::one()) + (theta.exp() - F::one()))).exp()
}

/// Brute-force route to the same MGF: uniformize the height birth-death
/// chain on a window of integers wide enough that the neglected mass,
/// amplified by `exp(|theta| * range)`, stays below `tol`.
pub fn height_mgf_uniformized<F: Scalar>(d: u32, t: F, theta: F, tol: F) -> Result<F> {
    let tf = t.as_f64();
    let th = theta.as_f64();
    let lambda = (f64::from(d) + 1.0) * tf;
    // After n discrete steps the height lies in [-n, n]; find a window whose
    // Poisson tail, amplified by the largest |exp(-theta j)| inside, is small.
    let mut tol_p = (tol.as_f64() * 0.5).max(1e-300);
    let window = loop {
        let w = poisson_window(lambda, tol_p);
        let n = w.weights.len() - 1;
        if w.tail * (th.abs() * (n as f64 + 1.0)).exp() <= tol.as_f64() {
            break w;
        }
        tol_p *= 1e-3;
        if tol_p < 1e-290 {
            return Err(Error::Truncation {
                requested: tol.as_f64(),
                achieved: w.tail,
            });
        }
    };
    let steps = window.weights.len() - 1;
    let size = 2 * steps + 1;
    let offset = steps as isize;
    let d_f = F::of(f64::from(d));
    let dp1 = F::of(f64::from(d) + 1.0);
    let up = d_f / dp1;
    let down = F::one() / dp1;
    let mut v = vec![F::zero(); size];
    v[offset as usize] = F::one();
    let mut next = vec![F::zero(); size];
    let mut mgf = F::zero();
    for (n, &w) in window.weights.iter().enumerate() {
        if w > 0.0 {
            let wf = F::of(w);
            let mut partial = F::zero();
            for (j, &mass) in v.iter().enumerate() {
                if mass != F::zero() {
                    let height = j as isize - offset;
                    partial += mass * (-theta * F::of(height as f64)).exp();
                }
            }
            mgf += wf * partial;
        }
        if n < steps {
            for x in next.iter_mut() {
                *x = F::zero();
            }
            for (j, &mass) in v.iter().enumerate() {
                if mass == F::zero() {
                    continue;
                }
                if j > 0 {
                    next[j - 1] += mass * down;
                }
                if j + 1 < size {
                    next[j + 1] += mass * up;
                }
            }
            std::mem::swap(&mut v, &mut next);
        }
    }
    Ok(mgf)
}

/// Decay exponent `(sqrt(d) - 1)^2` of the on-diagonal kernel bound.
pub fn decay_exponent(d: u32) -> f64 {
    let s = f64::from(d).sqrt();
    (s - 1.0) * (s - 1.0)
}

/// Pointwise kernel bound `(sqrt(d))^{-k} exp(-t (sqrt(d) - 1)^2)`;
/// `heat_kernel(d, t, k) <= heat_bound(d, t, k)` for all arguments.
pub fn heat_bound<F: Scalar>(d: u32, t: F, k: usize) -> F {
    let s = F::of(f64::from(d)).sqrt();
    s.powi(-(k as i32)) * (-t * F::of(decay_exponent(d))).exp()
}

/// Upper bound on `int_{s0}^inf w(s) p_s(x, y) ds` for `D(x, y) = k`, where
/// the weight is `w(s) = s^m exp(-mu s)` with `m` in `{0, 1}`.
pub fn tail_integral_bound(d: u32, k: usize, s0: f64, mu: f64, m: u32) -> f64 {
    let c = decay_exponent(d) + mu;
    let amp = f64::from(d).sqrt().powi(-(k as i32));
    match m {
        0 => amp * (-c * s0).exp() / c,
        1 => amp * (-c * s0).exp() * (s0 * c + 1.0) / (c * c),
        _ => unimplemented!("only weights s^0 and s^1 are used"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;
    use crate::tree::build_ball;

    #[test]
    fn time_zero_is_point_mass() {
        let k = radial_distribution::<f64>(2, 0.0, None, 1e-12).unwrap();
        assert_eq!(k.dist.at(0), 1.0);
        assert_eq!(k.leak, 0.0);
        assert_eq!(k.total(), 1.0);
    }

    #[test]
    fn short_time_first_order_rates() {
        let t = 1e-4;
        for d in [2u32, 3] {
            let k = radial_distribution::<f64>(d, t, None, 1e-12).unwrap();
            let expected = (f64::from(d) + 1.0) * t;
            assert!((k.dist.at(1) - expected).abs() < 1e-6);
            let p0 = k.kernel_at(0);
            assert!((p0 - (1.0 - (f64::from(d) + 1.0) * t)).abs() < 1e-6);
        }
    }

    #[test]
    fn normalization_within_tolerance() {
        let k = radial_distribution::<f64>(2, 1.0, Some(60), 1e-10).unwrap();
        let total = k.total();
        assert!(total <= 1.0 + 1e-14);
        assert!(total + k.leak >= 1.0 - 1e-14);
        assert!(1.0 - total <= 1e-10);
    }

    #[test]
    fn normalization_grid() {
        for d in [2u32, 3, 4] {
            for &t in &[0.1, 0.5, 1.0, 2.0, 5.0] {
                let k = radial_distribution::<f64>(d, t, None, 1e-12).unwrap();
                let total = k.total();
                assert!(total <= 1.0 + 1e-12);
                assert!(total + k.leak >= 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn too_small_k_max_is_an_explicit_error() {
        let r = radial_distribution::<f64>(2, 5.0, Some(3), 1e-10);
        assert!(matches!(r, Err(Error::Truncation { .. })));
    }

    #[test]
    fn kernel_matches_ball_walk_exponential() {
        // Independent oracle: uniformized walk on an enumerated radius-12
        // ball. Influence of the missing exterior on p_t(x, x) at t = 1
        // requires leaving and re-entering, which is far below 1e-8.
        let ball = build_ball(2, 12).unwrap();
        let origin = 0usize;
        let exact = exact::ball_walk_distribution(&ball, origin, 1.0, 1e-12);
        let p = heat_kernel::<f64>(2, 1.0, 0, 1e-12).unwrap();
        assert!((p - exact[origin]).abs() < 1e-8);
    }

    #[test]
    fn chapman_kolmogorov_via_radial_identities() {
        let ball = build_ball(2, 8).unwrap();
        for &(s, u) in &[(0.5, 0.5), (1.0, 2.0)] {
            let ks = radial_distribution::<f64>(2, s, None, 1e-12).unwrap();
            let ku = radial_distribution::<f64>(2, u, None, 1e-12).unwrap();
            let ksu = radial_distribution::<f64>(2, s + u, None, 1e-12).unwrap();
            for target_dist in 0..=2usize {
                // x = origin, y = some vertex at the target distance.
                let y = (0..ball.len())
                    .find(|&i| ball.depth_of(i) == target_dist)
                    .unwrap();
                let mut conv = 0.0;
                for z in 0..ball.len() {
                    conv += ks.kernel_at(ball.depth_of(z)) * ku.kernel_at(ball.dist(z, y));
                }
                let direct = ksu.kernel_at(target_dist);
                assert!(
                    (conv - direct).abs() < 1e-6,
                    "CK failed at (s,u)=({s},{u}), k={target_dist}: {conv} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn height_mgf_at_zero_is_one() {
        for d in [2u32, 5] {
            for &t in &[0.0, 0.7, 3.0] {
                assert_eq!(height_mgf::<f64>(d, t, 0.0), 1.0);
            }
        }
    }

    #[test]
    fn height_mgf_at_log_sqrt_d() {
        // theta = log(sqrt d) turns the MGF into exp(-t (sqrt d - 1)^2).
        let d = 2u32;
        let t = 1.0f64;
        let theta = f64::from(d).sqrt().ln();
        let v = height_mgf(d, t, theta);
        let expect = (-t * decay_exponent(d)).exp();
        assert!((v - expect).abs() < 1e-14);
        assert!((v - 0.8423).abs() < 1e-3);
    }

    #[test]
    fn height_mgf_matches_uniformized_chain() {
        let v = height_mgf::<f64>(2, 0.5, 0.3);
        let w = height_mgf_uniformized::<f64>(2, 0.5, 0.3, 1e-10).unwrap();
        assert!((v - w).abs() < 1e-8);
    }

    #[test]
    fn height_mgf_chain_grid() {
        for d in [2u32, 3, 4] {
            for &t in &[0.25, 0.5, 1.0, 2.0] {
                for &theta in &[-0.5, -0.3, 0.3, 0.5, 1.0, f64::from(d).sqrt().ln()] {
                    let v = height_mgf::<f64>(d, t, theta);
                    let w = height_mgf_uniformized::<f64>(d, t, theta, 1e-10).unwrap();
                    assert!(
                        (v - w).abs() < 1e-8,
                        "mismatch d={d} t={t} theta={theta}: {v} vs {w}"
                    );
                }
            }
        }
    }

    #[test]
    fn bound_is_tight_at_time_zero() {
        assert_eq!(heat_bound::<f64>(2, 0.0, 0), 1.0);
        let p = heat_kernel::<f64>(2, 0.0, 0, 1e-12).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn bound_dominates_kernel_on_grid() {
        for d in [2u32, 3, 4] {
            for &t in &[0.1, 0.5, 1.0, 2.0, 5.0] {
                let kernel = radial_distribution::<f64>(d, t, None, 1e-12).unwrap();
                for k in 0..=8usize {
                    let p = kernel.kernel_at(k);
                    let b = heat_bound::<f64>(d, t, k);
                    assert!(p <= b + 1e-10, "d={d} t={t} k={k}: p={p} bound={b}");
                }
            }
        }
    }

    #[test]
    fn specific_bound_values() {
        // d=2, t=1, k=0: the computed kernel sits strictly below the bound.
        let p = heat_kernel::<f64>(2, 1.0, 0, 1e-12).unwrap();
        let b = heat_bound::<f64>(2, 1.0, 0);
        assert!((b - (-decay_exponent(2)).exp()).abs() < 1e-15);
        assert!(p < b);
        // d=4, t=2, k=3: bound is 8^{-1} e^{-2} and dominates.
        let b43 = heat_bound::<f64>(4, 2.0, 3);
        assert!((b43 - (1.0 / 8.0) * (-2.0f64).exp()).abs() < 1e-15);
        let p43 = heat_kernel::<f64>(4, 2.0, 3, 1e-12).unwrap();
        assert!(p43 < b43);
    }

    #[test]
    fn generic_scalar_instantiates_in_f32() {
        let k = radial_distribution::<f32>(2, 0.5f32, None, 1e-5).unwrap();
        assert!((k.total() - 1.0).abs() < 1e-4);
        let m = height_mgf::<f32>(2, 1.0, 0.25);
        let m64 = height_mgf::<f64>(2, 1.0, 0.25);
        assert!((f64::from(m) - m64).abs() < 1e-5);
    }
}
