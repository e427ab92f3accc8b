//! Predictor-corrector engine.
//!
//! Predictor: at the left edge the constraint is differenced centrally with a
//! ghost node `y_{-1}`, and the PDE is taken at `xi = 0` where `Pi_tau = 0`.
//! Eliminating the ghost node gives `y_1` as a function of the new boundary
//! value `z`,
//!
//! ```text
//! y_1 = (2 alpha_0 h^2/sigma^4 + 2h/sigma^2) G(z) - beta h^2/sigma^2 - 1,
//! G(z) = q z - r + (z - 1)/(T - tau),
//! ```
//!
//! while an explicit step of the scheme in row 1 gives a second expression
//! for `y_1(z)`. Equating both is a scalar equation for the predicted `z`.
//!
//! Corrector: one linear implicit solve with the advection frozen at the
//! predicted `z`, followed by the explicit boundary update from the
//! three-point constraint.

use serde::{Deserialize, Serialize};

use crate::error::{SolverError, SolverResult};
use crate::mesh::{initial_layer, GridSpec, LayerState};
use crate::model::MarketParams;
use crate::scalar::{from_usize, lit, max_abs, Real};
use crate::scheme::{assemble_layer, constraint_root, residual_constraint, SchemeMode, StepContext};
use crate::solution::{Engine, LayerDiagnostics, SolveResult};
use crate::tridiag::solve_tridiagonal;

/// Number of sub-intervals scanned for sign changes in each bracket.
const SCAN_POINTS: usize = 64;
/// Bracket expansions attempted before giving up.
const MAX_EXPANSIONS: usize = 4;

/// How the reaction term of the explicit row-1 step is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionTerm {
    /// `beta^{j+1} y_1^j`, explicit in `y`.
    Explicit,
    /// `beta^{j+1} y_1^{j+1}`.
    Implicit,
}

/// What `march_pc` does when the predictor equation has no root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoBracketPolicy {
    /// Use the previous boundary value as the prediction and flag the layer.
    HoldPrevious,
    /// Abort the march.
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig<T> {
    /// Absolute tolerance on the predicted `z`.
    pub root_tol: T,
    pub max_iter: usize,
    /// The first bracket is `[z_prev / f, z_prev * f]`; each retry multiplies
    /// `f` by this factor again.
    pub bracket_factor: T,
    pub reaction: ReactionTerm,
    pub on_no_bracket: NoBracketPolicy,
}

impl<T: Real> Default for PredictorConfig<T> {
    fn default() -> Self {
        PredictorConfig {
            root_tol: lit(1e-10),
            max_iter: 100,
            bracket_factor: lit(2.0),
            reaction: ReactionTerm::Explicit,
            on_no_bracket: NoBracketPolicy::HoldPrevious,
        }
    }
}

impl<T: Real> PredictorConfig<T> {
    pub fn validate(&self) -> SolverResult<()> {
        if !(self.root_tol > T::zero()) || self.max_iter == 0 || !(self.bracket_factor > T::one()) {
            return Err(SolverError::InvalidParams(format!(
                "predictor needs root_tol > 0, max_iter >= 1, bracket_factor > 1 (got {}, {}, {})",
                self.root_tol, self.max_iter, self.bracket_factor
            )));
        }
        Ok(())
    }
}

/// Predicted `(y_1, z)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T> {
    pub y1: T,
    pub z: T,
    pub iterations: usize,
}

/// The two expressions for `y_1^{j+1}` as functions of the trial boundary value.
#[derive(Debug, Clone, Copy)]
pub struct PredictorEquations<T> {
    k: T,
    left: T,
    beta: T,
    h: T,
    var: T,
    drift: T,
    rate: T,
    dividend: T,
    z_prev: T,
    y0: T,
    y1: T,
    y2: T,
    reaction: ReactionTerm,
}

impl<T: Real> PredictorEquations<T> {
    pub fn new(ctx: &StepContext<'_, T>, reaction: ReactionTerm) -> SolverResult<Self> {
        let p = ctx.params;
        Ok(PredictorEquations {
            k: ctx.step(),
            left: ctx.time_left()?,
            beta: ctx.beta()?,
            h: ctx.grid.h(),
            var: p.sigma * p.sigma,
            drift: p.drift(),
            rate: p.rate,
            dividend: p.dividend,
            z_prev: ctx.prev.z,
            y0: ctx.prev.y[0],
            y1: ctx.prev.y[1],
            y2: ctx.prev.y[2],
            reaction,
        })
    }

    /// `G(z) = q z - r + (z - 1)/(T - tau)`.
    pub fn g(&self, z: T) -> T {
        self.dividend * z - self.rate + (z - T::one()) / self.left
    }

    fn z_rate(&self, z: T) -> (T, T) {
        ((z - self.z_prev) / (self.k * z), self.z_prev / (self.k * z * z))
    }

    /// `y_1` implied by the boundary conditions at `xi = 0`, and its `z`-derivative.
    pub fn from_boundary(&self, z: T) -> (T, T) {
        let two = lit::<T>(2.0);
        let (zr, dzr) = self.z_rate(z);
        let alpha0 = zr + self.drift - (z - T::one()) / self.left;
        let dalpha0 = dzr - self.left.recip();
        let h2 = self.h * self.h;
        let var2 = self.var * self.var;
        let factor = two * alpha0 * h2 / var2 + two * self.h / self.var;
        let dfactor = two * dalpha0 * h2 / var2;
        let g = self.g(z);
        let dg = self.dividend + self.left.recip();
        let y1 = factor * g - self.beta * h2 / self.var - T::one();
        (y1, dfactor * g + factor * dg)
    }

    /// `y_1` from the explicit step of row 1, and its `z`-derivative.
    pub fn from_explicit_step(&self, z: T) -> (T, T) {
        let two = lit::<T>(2.0);
        let (zr, dzr) = self.z_rate(z);
        let e = (-self.h).exp();
        let alpha1 = zr + self.drift - (z * e - T::one()) / self.left;
        let dalpha1 = dzr - e / self.left;
        let slope = (self.y2 - self.y0) / (two * self.h);
        let curvature = (self.y2 - two * self.y1 + self.y0) / (self.h * self.h);
        let transport = alpha1 * slope - self.var / two * curvature;
        match self.reaction {
            ReactionTerm::Explicit => (
                self.y1 - self.k * (transport + self.beta * self.y1),
                -self.k * dalpha1 * slope,
            ),
            ReactionTerm::Implicit => {
                let denom = T::one() + self.k * self.beta;
                (
                    (self.y1 - self.k * transport) / denom,
                    -self.k * dalpha1 * slope / denom,
                )
            }
        }
    }

    /// Scalar predictor residual and its derivative.
    pub fn residual(&self, z: T) -> (T, T) {
        let (b, db) = self.from_boundary(z);
        let (x, dx) = self.from_explicit_step(z);
        (b - x, db - dx)
    }
}

fn sign_changes<T: Real>(eq: &PredictorEquations<T>, centre: T, factor: T) -> Vec<(T, T)> {
    let span = factor.ln();
    let pts: Vec<(T, T)> = (0..=SCAN_POINTS)
        .map(|s| {
            let t = lit::<T>(2.0) * from_usize::<T>(s) / from_usize::<T>(SCAN_POINTS) - T::one();
            let z = centre * (t * span).exp();
            (z, eq.residual(z).0)
        })
        .collect();
    pts.windows(2)
        .filter(|w| w[0].1.is_finite() && w[1].1.is_finite())
        .filter(|w| (w[0].1 <= T::zero()) != (w[1].1 <= T::zero()) || w[0].1 == T::zero())
        .map(|w| (w[0].0, w[1].0))
        .collect()
}

fn nearest_bracket<T: Real>(brackets: &[(T, T)], centre: T) -> Option<(T, T)> {
    let dist = |b: &(T, T)| ((b.0 * b.1).sqrt() / centre).ln().abs();
    brackets
        .iter()
        .copied()
        .min_by(|a, b| dist(a).partial_cmp(&dist(b)).expect("finite brackets"))
}

/// Newton's method on `[lo, hi]`, falling back to bisection whenever the
/// Newton iterate leaves the bracket or stalls.
fn safeguarded_root<T: Real>(
    eq: &PredictorEquations<T>,
    mut lo: T,
    mut hi: T,
    cfg: &PredictorConfig<T>,
) -> SolverResult<(T, usize)> {
    let half = lit::<T>(0.5);
    let f_lo = eq.residual(lo).0;
    if f_lo == T::zero() {
        return Ok((lo, 0));
    }
    let lo_negative = f_lo < T::zero();
    let mut x = half * (lo + hi);
    let mut dx_old = hi - lo;
    for it in 1..=cfg.max_iter {
        let (f, df) = eq.residual(x);
        if f == T::zero() {
            return Ok((x, it));
        }
        if (f < T::zero()) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - f / df;
        let use_newton = df != T::zero()
            && newton.is_finite()
            && newton > lo
            && newton < hi
            && (f / df).abs() * lit(2.0) < dx_old.abs();
        let next = if use_newton { newton } else { half * (lo + hi) };
        dx_old = next - x;
        x = next;
        if dx_old.abs() < cfg.root_tol || hi - lo < cfg.root_tol {
            return Ok((x, it));
        }
    }
    Err(SolverError::NoConvergence {
        iterations: cfg.max_iter,
        last_step: dx_old.to_f64().unwrap_or(f64::NAN),
    })
}

/// Solves the scalar predictor equation for the root nearest to `z_prev`.
pub fn predictor<T: Real>(ctx: &StepContext<'_, T>, cfg: &PredictorConfig<T>) -> SolverResult<Prediction<T>> {
    cfg.validate()?;
    let eq = PredictorEquations::new(ctx, cfg.reaction)?;
    let centre = ctx.prev.z;
    let mut factor = cfg.bracket_factor;
    for _ in 0..=MAX_EXPANSIONS {
        if let Some((lo, hi)) = nearest_bracket(&sign_changes(&eq, centre, factor), centre) {
            let (z, iterations) = safeguarded_root(&eq, lo, hi, cfg)?;
            if !(z > T::zero()) {
                return Err(SolverError::NonPositiveZ {
                    value: z.to_f64().unwrap_or(f64::NAN),
                });
            }
            let y1 = eq.from_boundary(z).0;
            return Ok(Prediction { y1, z, iterations });
        }
        factor *= cfg.bracket_factor;
    }
    let factor = factor / cfg.bracket_factor;
    Err(SolverError::NoBracket {
        lower: (centre / factor).to_f64().unwrap_or(f64::NAN),
        upper: (centre * factor).to_f64().unwrap_or(f64::NAN),
    })
}

/// Statistics of one corrector solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorInfo<T> {
    /// Residual of the frozen-coefficient linear system.
    pub residual_interior: T,
    pub residual_constraint: T,
    pub upwinded_rows: usize,
    pub dominance_violations: usize,
}

/// Implicit solve with the advection frozen at `z_tilde`, then the explicit
/// boundary update.
pub fn corrector<T: Real>(ctx: &StepContext<'_, T>, z_tilde: T) -> SolverResult<(LayerState<T>, CorrectorInfo<T>)> {
    let n = ctx.grid.intervals();
    let k = ctx.step();
    let rows = assemble_layer(ctx, z_tilde)?;
    let (lower, diag, upper) = rows.bands();
    let prev = &ctx.prev.y;
    let mut rhs: Vec<T> = prev[1..n].iter().map(|&v| v / k).collect();
    rhs[0] -= rows.rows[0].a * -T::one();
    rhs[n - 2] -= rows.rows[n - 2].b * T::zero();
    let interior = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;

    let mut y = Vec::with_capacity(n + 1);
    y.push(-T::one());
    y.extend(interior);
    y.push(T::zero());
    let z = constraint_root(&y, ctx.tau_next, ctx.grid, ctx.params)?;
    if !(z > T::zero()) || !z.is_finite() {
        return Err(SolverError::NonPositiveZ {
            value: z.to_f64().unwrap_or(f64::NAN),
        });
    }
    let info = CorrectorInfo {
        residual_interior: max_abs(&rows.residual(&y, prev, k)),
        residual_constraint: residual_constraint(&y, z, ctx.tau_next, ctx.grid, ctx.params)?.abs(),
        upwinded_rows: rows.upwinded,
        dominance_violations: rows.dominance_violations,
    };
    Ok((
        LayerState {
            j: ctx.prev.j + 1,
            tau: ctx.tau_next,
            y,
            z,
        },
        info,
    ))
}

/// One predictor-corrector step; applies the no-bracket policy.
pub fn pc_layer<T: Real>(
    ctx: &StepContext<'_, T>,
    cfg: &PredictorConfig<T>,
) -> SolverResult<(LayerState<T>, LayerDiagnostics<T>)> {
    let (z_tilde, iterations, fallback) = match predictor(ctx, cfg) {
        Ok(pred) => (pred.z, pred.iterations, false),
        Err(SolverError::NoBracket { .. }) if cfg.on_no_bracket == NoBracketPolicy::HoldPrevious => {
            log::debug!(
                "layer {}: predictor has no root, holding z = {}",
                ctx.prev.j + 1,
                ctx.prev.z
            );
            (ctx.prev.z, 0, true)
        }
        Err(e) => return Err(e),
    };
    let (layer, info) = corrector(ctx, z_tilde)?;
    let diag = LayerDiagnostics {
        j: layer.j,
        iterations,
        residual_interior: info.residual_interior,
        residual_constraint: info.residual_constraint,
        initial_residual: T::zero(),
        upwinded_rows: info.upwinded_rows,
        dominance_violations: info.dominance_violations,
        predicted_z: Some(z_tilde),
        predictor_fallback: fallback,
    };
    Ok((layer, diag))
}

/// Marches all `M` layers with the predictor-corrector scheme.
pub fn march_pc<T: Real>(
    p: &MarketParams<T>,
    g: &GridSpec<T>,
    mode: SchemeMode,
    cfg: &PredictorConfig<T>,
) -> SolverResult<SolveResult<T>> {
    p.validate()?;
    cfg.validate()?;
    let mut layers = Vec::with_capacity(g.layers() + 1);
    let mut diagnostics = Vec::with_capacity(g.layers());
    layers.push(initial_layer(p, g));
    for j in 0..g.layers() {
        let ctx = StepContext::new(p, g, &layers[j], mode);
        let (next, diag) = pc_layer(&ctx, cfg).map_err(|e| e.at_layer(j + 1))?;
        layers.push(next);
        diagnostics.push(diag);
    }
    Ok(SolveResult {
        params: *p,
        grid: *g,
        mode,
        engine: Engine::PredictorCorrector,
        layers,
        diagnostics,
    })
}
