//! Market inputs, coefficients of the transformed problem and the variable
//! changes linking the original and the fixed-domain formulation.
//!
//! The original problem prices `V(t, S, A)` for `0 < S < S_f(t, A)` with
//! `V(t, 0, A) = 0`, smooth pasting `dV/dS = 1` and `V = S_f - A` on the
//! boundary and terminal payoff `max(S - A, 0)`. It is never discretized
//! here. After `tau = T - t`, `x = A/S`, `W = V/A` and
//! `xi = ln(rho(tau) x)` the unknown `Pi = W + x dW/dx` satisfies
//!
//! ```text
//! Pi_tau + alpha(xi, tau) Pi_xi - sigma^2/2 Pi_xixi + beta(tau) Pi = 0,   xi > 0
//! Pi(0, tau) = -1,  Pi(inf, tau) = 0,  Pi(xi, 0) = -1 for xi < ln rho(0), 0 otherwise
//! ```
//!
//! together with the algebraic constraint tying `rho(tau)` to `Pi_xi(0, tau)`.

use serde::{Deserialize, Serialize};

use crate::error::{SolverError, SolverResult};
use crate::scalar::{lit, Real};

/// Market and contract inputs, all annualized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams<T> {
    /// Risk-free rate `r`.
    pub rate: T,
    /// Continuous dividend yield `q`.
    pub dividend: T,
    /// Volatility `sigma`.
    pub sigma: T,
    /// Maturity `T` in years.
    pub maturity: T,
}

impl<T: Real> MarketParams<T> {
    pub fn new(rate: T, dividend: T, sigma: T, maturity: T) -> SolverResult<Self> {
        let p = MarketParams {
            rate,
            dividend,
            sigma,
            maturity,
        };
        p.validate()?;
        Ok(p)
    }

    /// `r = 0.06, q = 0.04, sigma = 0.2, T = 50`.
    pub fn reference() -> Self {
        MarketParams {
            rate: lit(0.06),
            dividend: lit(0.04),
            sigma: lit(0.2),
            maturity: lit(50.0),
        }
    }

    /// Checks `r > 0`, `q >= 0`, `sigma > 0`, `T > 0`. A zero dividend yield
    /// is accepted with a warning.
    pub fn validate(&self) -> SolverResult<()> {
        let all_finite = [self.rate, self.dividend, self.sigma, self.maturity]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(SolverError::InvalidParams("non-finite input".into()));
        }
        if self.rate <= T::zero() {
            return Err(SolverError::InvalidParams(format!("r must be > 0, got {}", self.rate)));
        }
        if self.dividend < T::zero() {
            return Err(SolverError::InvalidParams(format!(
                "q must be >= 0, got {}",
                self.dividend
            )));
        }
        if self.dividend == T::zero() {
            log::warn!("q = 0: accepted, although the model assumes a positive dividend yield");
        }
        if self.sigma <= T::zero() {
            return Err(SolverError::InvalidParams(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if self.maturity <= T::zero() {
            return Err(SolverError::InvalidParams(format!(
                "T must be > 0, got {}",
                self.maturity
            )));
        }
        Ok(())
    }

    /// `sigma^2 / 2`.
    #[inline]
    pub fn half_variance(&self) -> T {
        self.sigma * self.sigma * lit(0.5)
    }

    /// `r - q - sigma^2 / 2`, the regular part of the advection speed.
    #[inline]
    pub fn drift(&self) -> T {
        self.rate - self.dividend - self.half_variance()
    }

    /// Remaining time `T - tau`, rejecting `tau` outside `[0, T)`.
    pub fn time_left(&self, tau: T) -> SolverResult<T> {
        if !(tau >= T::zero() && tau < self.maturity) {
            return Err(SolverError::TauOutOfRange {
                tau: tau.to_f64().unwrap_or(f64::NAN),
                maturity: self.maturity.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(self.maturity - tau)
    }
}

/// A point of the fixed domain: `xi >= 0`, `0 <= tau < T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedPoint<T> {
    pub xi: T,
    pub tau: T,
}

impl<T: Real> TransformedPoint<T> {
    pub fn new(p: &MarketParams<T>, xi: T, tau: T) -> SolverResult<Self> {
        if !(xi >= T::zero()) {
            return Err(SolverError::InvalidParams(format!("xi must be >= 0, got {xi}")));
        }
        p.time_left(tau)?;
        Ok(TransformedPoint { xi, tau })
    }

    /// Similarity variable `x = A/S = e^xi / rho`.
    pub fn similarity(&self, rho: T) -> T {
        self.xi.exp() / rho
    }

    /// Calendar time `t = T - tau`.
    pub fn calendar_time(&self, p: &MarketParams<T>) -> T {
        p.maturity - self.tau
    }
}

/// Boundary position at expiry, `max((1 + rT)/(1 + qT), 1)`.
pub fn rho_initial<T: Real>(p: &MarketParams<T>) -> T {
    let unclamped = (T::one() + p.rate * p.maturity) / (T::one() + p.dividend * p.maturity);
    unclamped.max(T::one())
}

/// Reaction coefficient `r + 1/(T - tau)`.
pub fn beta<T: Real>(p: &MarketParams<T>, tau: T) -> SolverResult<T> {
    Ok(p.rate + p.time_left(tau)?.recip())
}

/// Advection coefficient of the transformed equation,
/// `rho'/rho + r - q - sigma^2/2 - (rho e^-xi - 1)/(T - tau)`.
pub fn alpha_continuous<T: Real>(p: &MarketParams<T>, xi: T, tau: T, rho: T, rho_dot: T) -> SolverResult<T> {
    if !(rho > T::zero()) {
        return Err(SolverError::NonPositiveZ {
            value: rho.to_f64().unwrap_or(f64::NAN),
        });
    }
    let left = p.time_left(tau)?;
    Ok(rho_dot / rho + p.drift() - (rho * (-xi).exp() - T::one()) / left)
}

/// Boundary ratio implied by the slope `Pi_xi(0, tau)`:
/// `(1 + r(T-tau) + sigma^2/2 (T-tau) slope) / (1 + q(T-tau))`.
pub fn rho_constraint<T: Real>(p: &MarketParams<T>, tau: T, slope: T) -> SolverResult<T> {
    let left = p.time_left(tau)?;
    Ok((T::one() + p.rate * left + p.half_variance() * left * slope) / (T::one() + p.dividend * left))
}

/// Maps `(tau, rho)` pairs onto `(t, x_f)` with `t = T - tau` and
/// `x_f = 1/rho`, sorted by ascending `t`.
pub fn boundary_in_original_variables<T: Real>(p: &MarketParams<T>, rho_path: &[(T, T)]) -> SolverResult<Vec<(T, T)>> {
    let mut out = Vec::with_capacity(rho_path.len());
    for &(tau, rho) in rho_path {
        if !(rho > T::zero()) {
            return Err(SolverError::NonPositiveZ {
                value: rho.to_f64().unwrap_or(f64::NAN),
            });
        }
        out.push((p.maturity - tau, rho.recip()));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
    Ok(out)
}
