//! Moderate-deviation rate function for occupation-time vectors: the
//! Legendre transform `I(u) = sup_c { c.u - c^T Gamma c / 2 }`, its scalar
//! specialization `u^2 / (2 sigma^2)`, and the tilt solve `Gamma phi = u`
//! that steers the importance-sampled dynamics onto a target mean.

use crate::error::{Error, Result};
use crate::linalg;
use crate::potential::CovarianceMatrix;
use crate::scalar::Scalar;

/// Relative residual above which a target is declared outside the range of
/// the covariance matrix (rate value +infinity).
pub const RANGE_RESIDUAL_TOL: f64 = 1e-8;

/// Result of a rate-function evaluation.
#[derive(Debug, Clone)]
pub struct RateEvaluation<F> {
    /// `I(u)`; `+inf` when `u` is not in the range of the matrix.
    pub value: F,
    /// The optimizing tilt with `Gamma phi = u`, when finite.
    pub tilt: Option<Vec<F>>,
}

/// Evaluate the rate function by reducing the supremum to the linear solve:
/// at the optimum `Gamma phi = u` and `I(u) = phi^T Gamma phi / 2 = phi.u / 2`.
pub fn rate_function<F: Scalar>(u: &[F], gamma: &CovarianceMatrix<F>) -> Result<RateEvaluation<F>> {
    let m = gamma.m;
    if u.len() != m {
        return Err(Error::Domain(format!(
            "target dimension {} does not match matrix dimension {m}",
            u.len()
        )));
    }
    let norm_u = u.iter().map(|&x| x * x).sum::<F>().sqrt();
    if norm_u == F::zero() {
        return Ok(RateEvaluation {
            value: F::zero(),
            tilt: Some(vec![F::zero(); m]),
        });
    }
    let (phi, residual) = linalg::sym_solve_min_norm(&gamma.entries, m, u, F::of(1e-12));
    if residual > F::of(RANGE_RESIDUAL_TOL) * norm_u {
        return Ok(RateEvaluation {
            value: F::infinity(),
            tilt: None,
        });
    }
    let value = F::of(0.5) * phi.iter().zip(u).map(|(&a, &b)| a * b).sum::<F>();
    Ok(RateEvaluation {
        value,
        tilt: Some(phi),
    })
}

/// Scalar rate `u^2 / (2 sigma^2)`.
pub fn rate_1d<F: Scalar>(u: F, sigma2: F) -> Result<F> {
    if sigma2 <= F::zero() {
        return Err(Error::Domain("sigma^2 must be positive".into()));
    }
    Ok(u * u / (F::of(2.0) * sigma2))
}

/// Minimal-norm tilt with `Gamma phi = u`, for steering the tilted dynamics.
pub fn tilt_for_target<F: Scalar>(u: &[F], gamma: &CovarianceMatrix<F>) -> Result<Vec<F>> {
    let eval = rate_function(u, gamma)?;
    match eval.tilt {
        Some(phi) => Ok(phi),
        None => {
            let (_, residual) = linalg::sym_solve_min_norm(&gamma.entries, gamma.m, u, F::of(1e-12));
            Err(Error::InfeasibleTarget {
                residual: residual.as_f64(),
            })
        }
    }
}

/// The time scale `a_t = t^alpha` separating the central-limit and
/// large-deviation regimes; valid exponents lie strictly between 1/2 and 1,
/// which makes both `a_t / t` and `sqrt(t) / a_t` vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingSchedule {
    exponent: f64,
}

impl ScalingSchedule {
    pub fn new(exponent: f64) -> Result<Self> {
        if !(exponent > 0.5 && exponent < 1.0) {
            return Err(Error::Domain(format!(
                "scaling exponent {exponent} must lie strictly inside (1/2, 1)"
            )));
        }
        Ok(ScalingSchedule { exponent })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// `a_t = t^alpha`.
    pub fn at(&self, t: f64) -> f64 {
        t.powf(self.exponent)
    }

    /// Tilt strength `a_t / t` entering the tilted jump rates.
    pub fn kappa(&self, t: f64) -> f64 {
        self.at(t) / t
    }

    /// Normalization `t / a_t^2` of log-probabilities.
    pub fn rate_scale(&self, t: f64) -> f64 {
        t / (self.at(t) * self.at(t))
    }
}
