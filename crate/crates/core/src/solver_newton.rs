//! Newton engine: every layer solves the full nonlinear system in
//! `Y = (y_1, .., y_{N-1}, z)`.
//!
//! The Jacobian is bordered tridiagonal,
//!
//! ```text
//! J = | J11  J12 |    J11: tridiagonal (a_i, c_i, b_i)
//!     | J21  J22 |    J12: dF1/dz,  J21 = (-sigma^2/(D h), sigma^2/(4 D h), 0, ..),  J22 = 1
//! ```
//!
//! with `D = q + 1/(T - tau)`. A Newton correction is obtained by eliminating
//! the border: two Thomas solves `u = J11^-1 F1`, `v = J11^-1 J12`, the scalar
//! Schur step `dz = (-F2 + J21 u)/(J22 - J21 v)` and `dY1 = -u - v dz`.

use serde::{Deserialize, Serialize};

use crate::error::{SolverError, SolverResult};
use crate::mesh::{initial_layer, GridSpec, LayerState};
use crate::model::MarketParams;
use crate::scalar::{lit, max_abs, Real};
use crate::scheme::{assemble_layer, residual_constraint, LayerRows, SchemeMode, StepContext};
use crate::solution::{Engine, LayerDiagnostics, SolveResult};
use crate::tridiag::solve_tridiagonal;

/// Threshold below which the Schur complement is treated as singular.
pub const SCHUR_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig<T> {
    /// Stop once `||Y^{l+1} - Y^l||_inf < tol`.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for NewtonConfig<T> {
    fn default() -> Self {
        NewtonConfig {
            tol: lit(1e-8),
            max_iter: 20,
        }
    }
}

impl<T: Real> NewtonConfig<T> {
    pub fn validate(&self) -> SolverResult<()> {
        if !(self.tol > T::zero()) || self.max_iter == 0 {
            return Err(SolverError::InvalidParams(format!(
                "Newton tol must be > 0 and max_iter >= 1 (got {}, {})",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

/// Blocks of the layer Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlocks<T> {
    /// `a_2 .. a_{N-1}`.
    pub lower: Vec<T>,
    /// `c_1 .. c_{N-1}`.
    pub diag: Vec<T>,
    /// `b_1 .. b_{N-2}`.
    pub upper: Vec<T>,
    /// `dF1_i/dz`.
    pub j12: Vec<T>,
    /// The two nonzero entries of `J21`, at `y_1` and `y_2`.
    pub j21: (T, T),
    pub j22: T,
}

impl<T: Real> JacobianBlocks<T> {
    /// Order of the full system, `N`.
    pub fn order(&self) -> usize {
        self.diag.len() + 1
    }

    /// Dense `N x N` matrix, unknowns ordered `(y_1, .., y_{N-1}, z)`.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let m = self.diag.len();
        let mut a = vec![vec![T::zero(); m + 1]; m + 1];
        for i in 0..m {
            a[i][i] = self.diag[i];
            if i > 0 {
                a[i][i - 1] = self.lower[i - 1];
            }
            if i + 1 < m {
                a[i][i + 1] = self.upper[i];
            }
            a[i][m] = self.j12[i];
        }
        a[m][0] = self.j21.0;
        a[m][1] = self.j21.1;
        a[m][m] = self.j22;
        a
    }
}

/// Residuals `(F1, F2)` of the layer system at `(y_next, z_next)`.
pub fn layer_residual<T: Real>(y_next: &[T], z_next: T, ctx: &StepContext<'_, T>) -> SolverResult<(Vec<T>, T)> {
    let rows = assemble_layer(ctx, z_next)?;
    let f1 = rows.residual(y_next, &ctx.prev.y, ctx.step());
    let f2 = residual_constraint(y_next, z_next, ctx.tau_next, ctx.grid, ctx.params)?;
    Ok((f1, f2))
}

fn jacobian_from_rows<T: Real>(
    rows: &LayerRows<T>,
    y_next: &[T],
    ctx: &StepContext<'_, T>,
) -> SolverResult<JacobianBlocks<T>> {
    let (lower, diag, upper) = rows.bands();
    let j12 = rows
        .derivatives
        .iter()
        .enumerate()
        .map(|(m, d)| {
            let i = m + 1;
            d.da * y_next[i - 1] + d.dc * y_next[i] + d.db * y_next[i + 1]
        })
        .collect();
    let p = ctx.params;
    let h = ctx.grid.h();
    let dd = p.dividend + ctx.time_left()?.recip();
    let var = p.sigma * p.sigma;
    Ok(JacobianBlocks {
        lower,
        diag,
        upper,
        j12,
        j21: (-var / (dd * h), var / (lit::<T>(4.0) * dd * h)),
        j22: T::one(),
    })
}

/// Analytic Jacobian of `(F1, F2)` at `(y_next, z_next)`.
pub fn build_jacobian<T: Real>(y_next: &[T], z_next: T, ctx: &StepContext<'_, T>) -> SolverResult<JacobianBlocks<T>> {
    let rows = assemble_layer(ctx, z_next)?;
    jacobian_from_rows(&rows, y_next, ctx)
}

/// One Newton correction and the quantities it was computed from.
#[derive(Debug, Clone)]
pub struct NewtonStep<T> {
    pub f1: Vec<T>,
    pub f2: T,
    pub jacobian: JacobianBlocks<T>,
    /// Correction of `y_1 .. y_{N-1}`.
    pub delta_y: Vec<T>,
    pub delta_z: T,
    pub upwinded_rows: usize,
    pub dominance_violations: usize,
}

impl<T: Real> NewtonStep<T> {
    pub fn step_norm(&self) -> T {
        max_abs(&self.delta_y).max(self.delta_z.abs())
    }

    pub fn residual_norm(&self) -> T {
        max_abs(&self.f1).max(self.f2.abs())
    }
}

/// Computes the Newton correction at `(y_next, z_next)` by block elimination.
pub fn newton_step<T: Real>(y_next: &[T], z_next: T, ctx: &StepContext<'_, T>) -> SolverResult<NewtonStep<T>> {
    let rows = assemble_layer(ctx, z_next)?;
    let f1 = rows.residual(y_next, &ctx.prev.y, ctx.step());
    let f2 = residual_constraint(y_next, z_next, ctx.tau_next, ctx.grid, ctx.params)?;
    let jac = jacobian_from_rows(&rows, y_next, ctx)?;

    // The border couples the two stages; eliminating dz through the Schur
    // complement gives the coupled solve in one pass.
    let u = solve_tridiagonal(&jac.lower, &jac.diag, &jac.upper, &f1)?;
    let v = solve_tridiagonal(&jac.lower, &jac.diag, &jac.upper, &jac.j12)?;
    let schur = jac.j22 - (jac.j21.0 * v[0] + jac.j21.1 * v[1]);
    if !(schur.abs() >= lit(SCHUR_TOL)) {
        return Err(SolverError::SingularSchur {
            value: schur.to_f64().unwrap_or(f64::NAN),
        });
    }
    let delta_z = (-f2 + jac.j21.0 * u[0] + jac.j21.1 * u[1]) / schur;
    let delta_y: Vec<T> = u.iter().zip(&v).map(|(&ui, &vi)| -ui - vi * delta_z).collect();
    if !delta_z.is_finite() || delta_y.iter().any(|d| !d.is_finite()) {
        return Err(SolverError::NonFinite("Newton correction".into()));
    }
    Ok(NewtonStep {
        f1,
        f2,
        jacobian: jac,
        delta_y,
        delta_z,
        upwinded_rows: rows.upwinded,
        dominance_violations: rows.dominance_violations,
    })
}

/// Newton iteration for one layer, starting from the previous layer.
pub fn newton_layer<T: Real>(
    ctx: &StepContext<'_, T>,
    cfg: &NewtonConfig<T>,
) -> SolverResult<(LayerState<T>, LayerDiagnostics<T>)> {
    newton_layer_observed(ctx, cfg, |_, _, _| {})
}

/// [`newton_layer`] calling `observe(y, z, step)` before every update.
pub fn newton_layer_observed<T: Real, F>(
    ctx: &StepContext<'_, T>,
    cfg: &NewtonConfig<T>,
    observe: F,
) -> SolverResult<(LayerState<T>, LayerDiagnostics<T>)>
where
    F: FnMut(&[T], T, &NewtonStep<T>),
{
    newton_solve(ctx, cfg, ctx.prev.y.clone(), ctx.prev.z, observe)
}

/// Newton iteration for the layer system of `ctx` from an arbitrary first
/// iterate `(y, z)`; `y` must carry the boundary values.
pub fn newton_solve<T: Real, F>(
    ctx: &StepContext<'_, T>,
    cfg: &NewtonConfig<T>,
    mut y: Vec<T>,
    mut z: T,
    mut observe: F,
) -> SolverResult<(LayerState<T>, LayerDiagnostics<T>)>
where
    F: FnMut(&[T], T, &NewtonStep<T>),
{
    cfg.validate()?;
    let n = ctx.grid.intervals();
    let mut initial_residual = None;
    let mut last_norm = T::infinity();

    for iteration in 1..=cfg.max_iter {
        let step = newton_step(&y, z, ctx)?;
        observe(&y, z, &step);
        initial_residual.get_or_insert(step.residual_norm());
        for (yi, d) in y[1..n].iter_mut().zip(&step.delta_y) {
            *yi += *d;
        }
        z += step.delta_z;
        if !(z > T::zero()) {
            return Err(SolverError::NonPositiveZ {
                value: z.to_f64().unwrap_or(f64::NAN),
            });
        }
        last_norm = step.step_norm();
        if last_norm < cfg.tol {
            let rows = assemble_layer(ctx, z)?;
            let f1 = rows.residual(&y, &ctx.prev.y, ctx.step());
            let f2 = residual_constraint(&y, z, ctx.tau_next, ctx.grid, ctx.params)?;
            let diag = LayerDiagnostics {
                j: ctx.prev.j + 1,
                iterations: iteration,
                residual_interior: max_abs(&f1),
                residual_constraint: f2.abs(),
                initial_residual: initial_residual.unwrap_or_else(T::zero),
                upwinded_rows: rows.upwinded,
                dominance_violations: rows.dominance_violations,
                predicted_z: None,
                predictor_fallback: false,
            };
            let layer = LayerState {
                j: ctx.prev.j + 1,
                tau: ctx.tau_next,
                y,
                z,
            };
            return Ok((layer, diag));
        }
    }
    Err(SolverError::NoConvergence {
        iterations: cfg.max_iter,
        last_step: last_norm.to_f64().unwrap_or(f64::NAN),
    })
}

/// Marches all `M` layers with Newton's method.
pub fn march_newton<T: Real>(
    p: &MarketParams<T>,
    g: &GridSpec<T>,
    mode: SchemeMode,
    cfg: &NewtonConfig<T>,
) -> SolverResult<SolveResult<T>> {
    p.validate()?;
    cfg.validate()?;
    let mut layers = Vec::with_capacity(g.layers() + 1);
    let mut diagnostics = Vec::with_capacity(g.layers());
    layers.push(initial_layer(p, g));
    for j in 0..g.layers() {
        let ctx = StepContext::new(p, g, &layers[j], mode);
        let (next, diag) = newton_layer(&ctx, cfg).map_err(|e| e.at_layer(j + 1))?;
        layers.push(next);
        diagnostics.push(diag);
    }
    Ok(SolveResult {
        params: *p,
        grid: *g,
        mode,
        engine: Engine::Newton,
        layers,
        diagnostics,
    })
}
