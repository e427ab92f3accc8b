//! Mesh refinement studies, engine comparison and post-processing of solutions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{SolverError, SolverResult};
use crate::mesh::GridSpec;
use crate::model::MarketParams;
use crate::scalar::{from_usize, lit, Real};
use crate::solution::{solve, Engine, SolveResult, SolverSettings};

/// One mesh level of a refinement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow<T> {
    pub n: usize,
    pub m: usize,
    /// `rho` at each probe time.
    pub rho: Vec<T>,
    /// `|rho_N - rho_{N/2}|`; `None` on the first row.
    pub diff: Vec<Option<T>>,
    /// `log2(diff_{N/2} / diff_N)`; `None` on the first two rows.
    pub cr: Vec<Option<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport<T> {
    pub probe_times: Vec<T>,
    pub rows: Vec<RefinementRow<T>>,
}

impl<T: Real> RefinementReport<T> {
    /// Column of `rho` values for probe `p`.
    pub fn rho_column(&self, p: usize) -> Vec<T> {
        self.rows.iter().map(|r| r.rho[p]).collect()
    }

    pub fn diff_column(&self, p: usize) -> Vec<T> {
        self.rows.iter().filter_map(|r| r.diff[p]).collect()
    }

    pub fn cr_column(&self, p: usize) -> Vec<T> {
        self.rows.iter().filter_map(|r| r.cr[p]).collect()
    }
}

/// `log2(coarse / fine)`.
pub fn convergence_ratio<T: Real>(coarse_diff: T, fine_diff: T) -> T {
    (coarse_diff / fine_diff).log2()
}

/// Runs the engine on `N = base_n * 2^l`, `l = 0..levels`, with the default
/// `M` and `L` for each level, and tabulates `rho` at the probe times.
///
/// Levels run concurrently on a pool of `jobs` threads (all cores when `None`).
pub fn refinement_study<T: Real>(
    p: &MarketParams<T>,
    base_n: usize,
    levels: usize,
    engine: Engine,
    settings: &SolverSettings<T>,
    probes: &[T],
    jobs: Option<usize>,
) -> SolverResult<RefinementReport<T>> {
    p.validate()?;
    if levels == 0 {
        return Err(SolverError::InvalidGrid("refinement needs at least one level".into()));
    }
    for &tau in probes {
        if !(tau > T::zero() && tau < p.maturity) {
            return Err(SolverError::TauOutOfRange {
                tau: tau.to_f64().unwrap_or(f64::NAN),
                maturity: p.maturity.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let sizes: Vec<usize> = (0..levels).map(|l| base_n << l).collect();
    let run = |&n: &usize| -> SolverResult<(usize, usize, Vec<T>)> {
        let level = || -> SolverResult<(usize, usize, Vec<T>)> {
            let g = GridSpec::for_params(p, n, None, None, None)?;
            let res = solve(p, &g, engine, settings)?;
            Ok((n, g.layers(), probes.iter().map(|&t| res.rho_at(t)).collect()))
        };
        level().map_err(|e| SolverError::AtLevel { n, source: Box::new(e) })
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| SolverError::InvalidParams(format!("worker pool: {e}")))?;
    let results: Vec<_> = pool.install(|| sizes.par_iter().map(run).collect::<Vec<_>>());

    let mut rows: Vec<RefinementRow<T>> = Vec::with_capacity(levels);
    for r in results {
        let (n, m, rho) = r?;
        let diff: Vec<Option<T>> = match rows.last() {
            Some(prev) => rho.iter().zip(&prev.rho).map(|(a, b)| Some((*a - *b).abs())).collect(),
            None => vec![None; rho.len()],
        };
        let cr = match rows.last() {
            Some(prev) => diff
                .iter()
                .zip(&prev.diff)
                .map(|(d, dp)| match (d, dp) {
                    (Some(d), Some(dp)) => Some(convergence_ratio(*dp, *d)),
                    _ => None,
                })
                .collect(),
            None => vec![None; rho.len()],
        };
        rows.push(RefinementRow { n, m, rho, diff, cr });
    }
    Ok(RefinementReport {
        probe_times: probes.to_vec(),
        rows,
    })
}

/// Recovers `W(x)` on `x_i = e^{xi_i} / z_j` from the synthetic portfolio,
/// using `x W(x) = (1 - 1/z) + int_{1/z}^x Pi dx'` with the trapezoid rule.
pub fn reconstruct_value<T: Real>(result: &SolveResult<T>, j: usize) -> SolverResult<Vec<(T, T)>> {
    let layer = result.layer(j)?;
    let z = layer.z;
    if !(z > T::zero()) {
        return Err(SolverError::NonPositiveZ {
            value: z.to_f64().unwrap_or(f64::NAN),
        });
    }
    let g = &result.grid;
    let h = g.h();
    let half = lit::<T>(0.5);
    let base = T::one() - z.recip();
    let mut out = Vec::with_capacity(layer.y.len());
    let mut quad = T::zero();
    let mut prev = T::zero();
    for (i, &pi) in layer.y.iter().enumerate() {
        let xi = g.xi(i);
        let weighted = pi * xi.exp();
        if i > 0 {
            quad += half * h * (prev + weighted);
        }
        prev = weighted;
        let x = xi.exp() / z;
        out.push((x, (base + quad / z) / x));
    }
    Ok(out)
}

/// Boundary ratio computed on `[0, L]` and on `[0, 2L]` with the same `h`,
/// together with the largest difference over the layers. Small values mean the
/// far-field condition `Pi(L) = 0` is harmless.
pub fn domain_doubling_check<T: Real>(
    p: &MarketParams<T>,
    g: &GridSpec<T>,
    engine: Engine,
    settings: &SolverSettings<T>,
) -> SolverResult<T> {
    let wide = GridSpec::new(
        2 * g.intervals(),
        g.layers(),
        lit::<T>(2.0) * g.length(),
        g.maturity(),
        g.eps_final(),
    )?;
    let a = solve(p, g, engine, settings)?;
    let b = solve(p, &wide, engine, settings)?;
    Ok(a.layers
        .iter()
        .zip(&b.layers)
        .fold(T::zero(), |m, (x, y)| m.max((x.z - y.z).abs())))
}

/// Side-by-side boundary paths of both engines on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineComparison<T> {
    pub taus: Vec<T>,
    pub rho_newton: Vec<T>,
    pub rho_pc: Vec<T>,
    /// `rho_pc - rho_newton` per layer.
    pub diff: Vec<T>,
    pub max_abs_diff: T,
    pub mean_abs_diff: T,
    /// Fraction of layers `j >= 1` with `rho_pc < rho_newton`.
    pub underestimation_fraction: T,
    /// Engine with the lower boundary on most layers, `None` on a tie.
    pub lower_engine: Option<Engine>,
    pub newton_max_iterations: usize,
    pub newton_upwinded_rows: usize,
    pub pc_upwinded_rows: usize,
    pub pc_fallback_layers: usize,
}

pub fn compare_engines<T: Real>(
    p: &MarketParams<T>,
    g: &GridSpec<T>,
    settings: &SolverSettings<T>,
) -> SolverResult<EngineComparison<T>> {
    let newton = solve(p, g, Engine::Newton, settings)?;
    let pc = solve(p, g, Engine::PredictorCorrector, settings)?;
    let taus = newton.taus();
    let rho_newton = newton.rho_path();
    let rho_pc = pc.rho_path();
    let diff: Vec<T> = rho_pc.iter().zip(&rho_newton).map(|(a, b)| *a - *b).collect();
    let max_abs_diff = diff.iter().fold(T::zero(), |m, d| m.max(d.abs()));
    let mean_abs_diff = diff.iter().fold(T::zero(), |s, d| s + d.abs()) / from_usize(diff.len());
    let below = diff.iter().skip(1).filter(|d| **d < T::zero()).count();
    let above = diff.iter().skip(1).filter(|d| **d > T::zero()).count();
    let steps = diff.len().saturating_sub(1).max(1);
    let lower_engine = match below.cmp(&above) {
        std::cmp::Ordering::Greater => Some(Engine::PredictorCorrector),
        std::cmp::Ordering::Less => Some(Engine::Newton),
        std::cmp::Ordering::Equal => None,
    };
    Ok(EngineComparison {
        taus,
        rho_newton,
        rho_pc,
        diff,
        max_abs_diff,
        mean_abs_diff,
        underestimation_fraction: from_usize::<T>(below) / from_usize(steps),
        lower_engine,
        newton_max_iterations: newton.max_iterations(),
        newton_upwinded_rows: newton.diagnostics.iter().map(|d| d.upwinded_rows).sum(),
        pc_upwinded_rows: pc.diagnostics.iter().map(|d| d.upwinded_rows).sum(),
        pc_fallback_layers: pc.diagnostics.iter().filter(|d| d.predictor_fallback).count(),
    })
}
