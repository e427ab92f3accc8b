//! Uniform space-time mesh on `[0, L] x [0, T - eps]` and the initial layer.

use serde::{Deserialize, Serialize};

use crate::error::{SolverError, SolverResult};
use crate::model::{rho_initial, MarketParams};
use crate::scalar::{from_usize, lit, Real};

/// Offset of the last time layer from maturity.
pub const DEFAULT_EPS_FINAL: f64 = 1e-7;

/// Uniform mesh description.
///
/// Spatial nodes are `xi_i = i h`, `i = 0..=N`, with `h = L/N`. Time layers are
/// `tau_j = j k` for `j < M` with `k = T/M`; the last layer is pulled back to
/// `tau_M = T - eps_final` because the coefficients blow up at `tau = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    intervals: usize,
    layers: usize,
    length: T,
    maturity: T,
    eps_final: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(intervals: usize, layers: usize, length: T, maturity: T, eps_final: T) -> SolverResult<Self> {
        if intervals < 4 {
            return Err(SolverError::InvalidGrid(format!("N must be >= 4, got {intervals}")));
        }
        if layers < 2 {
            return Err(SolverError::InvalidGrid(format!("M must be >= 2, got {layers}")));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(SolverError::InvalidGrid(format!("L must be > 0, got {length}")));
        }
        if !(maturity > T::zero()) || !maturity.is_finite() {
            return Err(SolverError::InvalidGrid(format!("T must be > 0, got {maturity}")));
        }
        let k = maturity / from_usize(layers);
        if !(eps_final > T::zero() && eps_final < k) {
            return Err(SolverError::InvalidGrid(format!(
                "eps_final must lie in (0, k) with k = {k}, got {eps_final}"
            )));
        }
        if !(maturity - eps_final < maturity) {
            return Err(SolverError::InvalidGrid(format!(
                "eps_final = {eps_final} is below the precision of T = {maturity}"
            )));
        }
        Ok(GridSpec {
            intervals,
            layers,
            length,
            maturity,
            eps_final,
        })
    }

    /// Builds a grid for `p`, filling unspecified values with the defaults:
    /// `M = ceil(2.5 N)`, `L = 5 ln rho(0)`, `eps = 1e-7`.
    pub fn for_params(
        p: &MarketParams<T>,
        intervals: usize,
        layers: Option<usize>,
        length: Option<T>,
        eps_final: Option<T>,
    ) -> SolverResult<Self> {
        let length = match length {
            Some(l) => l,
            None => default_domain_length(p)?,
        };
        GridSpec::new(
            intervals,
            layers.unwrap_or_else(|| default_time_steps(intervals)),
            length,
            p.maturity,
            eps_final.unwrap_or_else(|| lit(DEFAULT_EPS_FINAL)),
        )
    }

    /// Number of spatial intervals `N`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of time steps `M`.
    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn maturity(&self) -> T {
        self.maturity
    }

    pub fn eps_final(&self) -> T {
        self.eps_final
    }

    /// Spatial step `h = L/N`.
    pub fn h(&self) -> T {
        self.length / from_usize(self.intervals)
    }

    /// Nominal time step `k = T/M`.
    pub fn k(&self) -> T {
        self.maturity / from_usize(self.layers)
    }

    pub fn xi(&self, i: usize) -> T {
        from_usize::<T>(i) * self.h()
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..=self.intervals).map(|i| self.xi(i)).collect()
    }

    /// Time-to-maturity of layer `j`.
    pub fn tau(&self, j: usize) -> T {
        if j >= self.layers {
            self.maturity - self.eps_final
        } else {
            from_usize::<T>(j) * self.k()
        }
    }

    pub fn times(&self) -> Vec<T> {
        (0..=self.layers).map(|j| self.tau(j)).collect()
    }

    /// Layer whose time is nearest to `tau` (ties go to the lower index).
    pub fn nearest_layer(&self, tau: T) -> usize {
        let mut best = 0;
        let mut best_dist = T::infinity();
        for j in 0..=self.layers {
            let d = (self.tau(j) - tau).abs();
            if d < best_dist {
                best = j;
                best_dist = d;
            }
        }
        best
    }
}

/// `ceil(2.5 N)`, the time resolution used with every spatial refinement.
pub fn default_time_steps(intervals: usize) -> usize {
    (5 * intervals).div_ceil(2)
}

/// `5 ln rho(0)`; undefined when `rho(0) = 1`.
pub fn default_domain_length<T: Real>(p: &MarketParams<T>) -> SolverResult<T> {
    let rho0 = rho_initial(p);
    if rho0 <= T::one() {
        return Err(SolverError::ExplicitLengthRequired);
    }
    Ok(lit::<T>(5.0) * rho0.ln())
}

/// Discrete solution on one time layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerState<T> {
    pub j: usize,
    pub tau: T,
    /// `y_i ~ Pi(xi_i, tau_j)`, `N + 1` values with `y_0 = -1`, `y_N = 0`.
    pub y: Vec<T>,
    /// `z ~ rho(tau_j)`.
    pub z: T,
}

/// Step initial datum: `-1` for `xi_i <= ln rho(0)`, `0` beyond, `z = rho(0)`.
pub fn initial_layer<T: Real>(p: &MarketParams<T>, g: &GridSpec<T>) -> LayerState<T> {
    let rho0 = rho_initial(p);
    let cut = rho0.ln();
    let n = g.intervals();
    let mut y: Vec<T> = (0..=n)
        .map(|i| if g.xi(i) <= cut { -T::one() } else { T::zero() })
        .collect();
    y[0] = -T::one();
    y[n] = T::zero();
    LayerState {
        j: 0,
        tau: T::zero(),
        y,
        z: rho0,
    }
}
