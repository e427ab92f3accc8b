//! Fully implicit discretization of the transformed problem.
//!
//! For interior nodes `i = 1..N-1` the scheme reads
//!
//! ```text
//! (y_i - y_i^prev)/k + alpha_i (y_{i+1} - y_{i-1})/(2h)
//!     - sigma^2/2 (y_{i+1} - 2 y_i + y_{i-1})/h^2 + beta y_i = 0
//! alpha_i = (z - z_prev)/(k z) + r - q - sigma^2/2 - (z e^-xi_i - 1)/(T - tau)
//! ```
//!
//! with `y_0 = -1`, `y_N = 0`, and the boundary ratio is tied to the
//! three-point slope at `xi = 0` by
//!
//! ```text
//! z - (1 + r(T-tau))/(1 + q(T-tau))
//!   - sigma^2/2 (T-tau)/(1 + q(T-tau)) (-3 y_0 + 4 y_1 - y_2)/(2h) = 0.
//! ```
//!
//! Written row-wise as `a_i y_{i-1} + c_i y_i + b_i y_{i+1} - y_i^prev / k`.
//! The singular part `-(z e^-xi - 1)/(T - tau) * Pi_xi` can be differenced
//! one-sidedly, see [`SchemeMode`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{SolverError, SolverResult};
use crate::mesh::{GridSpec, LayerState};
use crate::model::MarketParams;
use crate::scalar::{lit, Real};

/// Treatment of the singular advection term `-(z e^-xi - 1)/(T - tau) Pi_xi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeMode {
    /// Central differences everywhere.
    Central,
    /// Central differences, switching a row to the one-sided stencil picked
    /// by the sign of `z e^-xi - 1` whenever the central row would get a
    /// positive off-diagonal. This only happens as `tau -> T`, where the
    /// singular speed dominates diffusion.
    UpwindSingular,
    /// One-sided differencing of the singular term in every row and layer.
    UpwindAlways,
}

impl SchemeMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeMode::Central => "central",
            SchemeMode::UpwindSingular => "upwind-singular",
            SchemeMode::UpwindAlways => "upwind-always",
        }
    }
}

impl fmt::Display for SchemeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "central" => Ok(SchemeMode::Central),
            "upwind-singular" | "upwind" => Ok(SchemeMode::UpwindSingular),
            "upwind-always" => Ok(SchemeMode::UpwindAlways),
            other => Err(format!(
                "unknown scheme mode '{other}' (expected central, upwind-singular or upwind-always)"
            )),
        }
    }
}

/// Stencil used for the singular term in one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    Central,
    /// `(y_{i+1} - y_i)/h`, used when `z e^-xi - 1 > 0`.
    Forward,
    /// `(y_i - y_{i-1})/h`.
    Backward,
}

/// Coefficients of one interior row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowCoefficients<T> {
    /// Multiplies `y_{i-1}`.
    pub a: T,
    /// Multiplies `y_i`.
    pub c: T,
    /// Multiplies `y_{i+1}`.
    pub b: T,
    /// `(z e^-xi_i - 1) / ((T - tau) 2h)`.
    pub d: T,
    pub stencil: Stencil,
}

/// Derivatives of a row's coefficients with respect to `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowDerivatives<T> {
    pub da: T,
    pub dc: T,
    pub db: T,
}

/// Everything needed to assemble the equations of layer `prev.j + 1`.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a, T> {
    pub params: &'a MarketParams<T>,
    pub grid: &'a GridSpec<T>,
    pub prev: &'a LayerState<T>,
    pub tau_next: T,
    pub mode: SchemeMode,
}

impl<'a, T: Real> StepContext<'a, T> {
    /// Context for the step from `prev` to the next grid layer.
    pub fn new(params: &'a MarketParams<T>, grid: &'a GridSpec<T>, prev: &'a LayerState<T>, mode: SchemeMode) -> Self {
        StepContext {
            params,
            grid,
            prev,
            tau_next: grid.tau(prev.j + 1),
            mode,
        }
    }

    /// Actual step length `tau_next - tau_prev` (shorter on the last layer).
    pub fn step(&self) -> T {
        self.tau_next - self.prev.tau
    }

    pub fn time_left(&self) -> SolverResult<T> {
        self.params.time_left(self.tau_next)
    }

    /// `beta^{j+1} = r + 1/(T - tau_next)`, constant across the layer.
    pub fn beta(&self) -> SolverResult<T> {
        crate::model::beta(self.params, self.tau_next)
    }

    pub fn unknowns(&self) -> usize {
        self.grid.intervals()
    }
}

fn check_z<T: Real>(z: T) -> SolverResult<()> {
    if z > T::zero() && z.is_finite() {
        Ok(())
    } else {
        Err(SolverError::NonPositiveZ {
            value: z.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Discrete advection coefficient
/// `(z_next - z_prev)/(k z_next) + r - q - sigma^2/2 - (z_next e^-xi - 1)/(T - tau_next)`.
pub fn discrete_alpha<T: Real>(z_next: T, z_prev: T, k: T, p: &MarketParams<T>, xi: T, tau_next: T) -> SolverResult<T> {
    check_z(z_next)?;
    let left = p.time_left(tau_next)?;
    Ok((z_next - z_prev) / (k * z_next) + p.drift() - (z_next * (-xi).exp() - T::one()) / left)
}

fn choose_stencil<T: Real>(mode: SchemeMode, singular: T, central_a: T, central_b: T) -> Stencil {
    let one_sided = if singular > T::zero() {
        Stencil::Forward
    } else {
        Stencil::Backward
    };
    match mode {
        SchemeMode::Central => Stencil::Central,
        SchemeMode::UpwindAlways => one_sided,
        SchemeMode::UpwindSingular => {
            if central_a > T::zero() || central_b > T::zero() {
                one_sided
            } else {
                Stencil::Central
            }
        }
    }
}

/// Row `i` (`1 <= i <= N-1`) of the implicit scheme for the trial value `z_next`.
pub fn assemble_interior_row<T: Real>(
    i: usize,
    ctx: &StepContext<'_, T>,
    z_next: T,
) -> SolverResult<RowCoefficients<T>> {
    Ok(assemble_row_with_derivatives(i, ctx, z_next)?.0)
}

/// Row `i` together with the `z`-derivatives of its coefficients.
pub fn assemble_row_with_derivatives<T: Real>(
    i: usize,
    ctx: &StepContext<'_, T>,
    z_next: T,
) -> SolverResult<(RowCoefficients<T>, RowDerivatives<T>)> {
    check_z(z_next)?;
    let p = ctx.params;
    let h = ctx.grid.h();
    let k = ctx.step();
    let left = ctx.time_left()?;
    let beta = ctx.beta()?;
    let z_prev = ctx.prev.z;
    let two_h = h + h;
    let var = p.sigma * p.sigma;
    let e = (-ctx.grid.xi(i)).exp();

    let regular = (z_next - z_prev) / (k * z_next) + p.drift();
    let d_regular = z_prev / (k * z_next * z_next);
    let singular = (z_next * e - T::one()) / left;
    let d_singular = e / left;

    let diffusion = var / (two_h * h);
    let mut a = -regular / two_h - diffusion;
    let mut b = regular / two_h - diffusion;
    let mut c = k.recip() + var / (h * h) + beta;
    let mut da = -d_regular / two_h;
    let mut db = d_regular / two_h;
    let mut dc = T::zero();

    let d = singular / two_h;
    let stencil = choose_stencil(ctx.mode, singular, a + d, b - d);
    match stencil {
        Stencil::Central => {
            a += d;
            b -= d;
            da += d_singular / two_h;
            db -= d_singular / two_h;
        }
        Stencil::Forward => {
            b -= singular / h;
            c += singular / h;
            db -= d_singular / h;
            dc += d_singular / h;
        }
        Stencil::Backward => {
            a += singular / h;
            c -= singular / h;
            da += d_singular / h;
            dc -= d_singular / h;
        }
    }
    Ok((RowCoefficients { a, c, b, d, stencil }, RowDerivatives { da, dc, db }))
}

/// All interior rows of one layer plus structural statistics.
#[derive(Debug, Clone)]
pub struct LayerRows<T> {
    pub rows: Vec<RowCoefficients<T>>,
    pub derivatives: Vec<RowDerivatives<T>>,
    /// Rows that use a one-sided stencil.
    pub upwinded: usize,
    /// One-sided rows that fail strict diagonal dominance although the
    /// regular advection satisfies `|alpha_reg| <= sigma^2/h`.
    pub dominance_violations: usize,
}

impl<T: Real> LayerRows<T> {
    /// Interior residuals `a y_{i-1} + c y_i + b y_{i+1} - y_i^prev / k`.
    pub fn residual(&self, y_next: &[T], prev: &[T], k: T) -> Vec<T> {
        self.rows
            .iter()
            .enumerate()
            .map(|(m, r)| {
                let i = m + 1;
                r.a * y_next[i - 1] + r.c * y_next[i] + r.b * y_next[i + 1] - prev[i] / k
            })
            .collect()
    }

    /// The `N - 1` interior bands of the row matrix (the boundary couplings
    /// `a_1` and `b_{N-1}` are dropped).
    pub fn bands(&self) -> (Vec<T>, Vec<T>, Vec<T>) {
        let lower = self.rows.iter().skip(1).map(|r| r.a).collect();
        let diag = self.rows.iter().map(|r| r.c).collect();
        let upper = self.rows.iter().take(self.rows.len() - 1).map(|r| r.b).collect();
        (lower, diag, upper)
    }
}

/// Assembles rows `1..N-1` for the trial boundary value `z_next`.
pub fn assemble_layer<T: Real>(ctx: &StepContext<'_, T>, z_next: T) -> SolverResult<LayerRows<T>> {
    let n = ctx.grid.intervals();
    let var = ctx.params.sigma * ctx.params.sigma;
    let h = ctx.grid.h();
    let regular = (z_next - ctx.prev.z) / (ctx.step() * z_next) + ctx.params.drift();
    let regular_ok = regular.abs() <= var / h;
    let mut rows = Vec::with_capacity(n - 1);
    let mut derivatives = Vec::with_capacity(n - 1);
    let mut upwinded = 0;
    let mut dominance_violations = 0;
    for i in 1..n {
        let (row, der) = assemble_row_with_derivatives(i, ctx, z_next)?;
        if row.stencil != Stencil::Central {
            upwinded += 1;
            let dominant = row.a <= T::zero() && row.b <= T::zero() && row.c > row.a.abs() + row.b.abs();
            if regular_ok && !dominant {
                dominance_violations += 1;
            }
        }
        rows.push(row);
        derivatives.push(der);
    }
    Ok(LayerRows {
        rows,
        derivatives,
        upwinded,
        dominance_violations,
    })
}

/// Interior residual vector `F1` (length `N - 1`) of the full layer vector
/// `y_next` (length `N + 1`, boundary values included).
pub fn residual_interior<T: Real>(y_next: &[T], ctx: &StepContext<'_, T>, z_next: T) -> SolverResult<Vec<T>> {
    let rows = assemble_layer(ctx, z_next)?;
    Ok(rows.residual(y_next, &ctx.prev.y, ctx.step()))
}

/// Boundary-constraint residual `F2`.
pub fn residual_constraint<T: Real>(
    y_next: &[T],
    z_next: T,
    tau_next: T,
    g: &GridSpec<T>,
    p: &MarketParams<T>,
) -> SolverResult<T> {
    Ok(z_next - constraint_root(y_next, tau_next, g, p)?)
}

/// The `z` solving `F2 = 0` for given `y` (`F2` is affine in `z`).
pub fn constraint_root<T: Real>(y_next: &[T], tau_next: T, g: &GridSpec<T>, p: &MarketParams<T>) -> SolverResult<T> {
    let left = p.time_left(tau_next)?;
    let denom = T::one() + p.dividend * left;
    let slope = (lit::<T>(-3.0) * y_next[0] + lit::<T>(4.0) * y_next[1] - y_next[2]) / (g.h() + g.h());
    Ok((T::one() + p.rate * left) / denom + p.half_variance() * left / denom * slope)
}
