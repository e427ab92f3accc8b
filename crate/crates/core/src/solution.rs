use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{SolverError, SolverResult};
use crate::mesh::{GridSpec, LayerState};
use crate::model::MarketParams;
use crate::scalar::Real;
use crate::scheme::SchemeMode;
use crate::solver_newton::{march_newton, NewtonConfig};
use crate::solver_pc::{march_pc, PredictorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Newton,
    #[serde(rename = "pc")]
    PredictorCorrector,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Newton => "newton",
            Engine::PredictorCorrector => "pc",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "newton" => Ok(Engine::Newton),
            "pc" | "predictor-corrector" => Ok(Engine::PredictorCorrector),
            other => Err(format!("unknown engine '{other}' (expected newton or pc)")),
        }
    }
}

/// Scheme mode plus the tuning of both engines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings<T> {
    pub mode: SchemeMode,
    pub newton: NewtonConfig<T>,
    pub predictor: PredictorConfig<T>,
}

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        SolverSettings {
            mode: SchemeMode::UpwindSingular,
            newton: NewtonConfig::default(),
            predictor: PredictorConfig::default(),
        }
    }
}

impl<T: Real> SolverSettings<T> {
    pub fn with_mode(mode: SchemeMode) -> Self {
        SolverSettings {
            mode,
            ..Default::default()
        }
    }
}

/// Per-layer solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerDiagnostics<T> {
    pub j: usize,
    /// Newton iterations, or predictor root-finding iterations.
    pub iterations: usize,
    /// `||F1||_inf` of the accepted layer.
    pub residual_interior: T,
    /// `|F2|` of the accepted layer.
    pub residual_constraint: T,
    /// `||F||_inf` at the first iterate (Newton only; zero otherwise).
    pub initial_residual: T,
    pub upwinded_rows: usize,
    pub dominance_violations: usize,
    /// Predicted boundary value (predictor-corrector only).
    pub predicted_z: Option<T>,
    /// The predictor found no root and the previous boundary value was reused.
    pub predictor_fallback: bool,
}

/// Full marching output: every layer of the solution surface plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult<T> {
    pub params: MarketParams<T>,
    pub grid: GridSpec<T>,
    pub mode: SchemeMode,
    pub engine: Engine,
    /// Layers `0..=M`.
    pub layers: Vec<LayerState<T>>,
    /// Diagnostics of layers `1..=M`, `diagnostics[j - 1]` for layer `j`.
    pub diagnostics: Vec<LayerDiagnostics<T>>,
}

impl<T: Real> SolveResult<T> {
    pub fn taus(&self) -> Vec<T> {
        self.layers.iter().map(|l| l.tau).collect()
    }

    pub fn rho_path(&self) -> Vec<T> {
        self.layers.iter().map(|l| l.z).collect()
    }

    /// `(tau_j, rho_j)` pairs.
    pub fn boundary(&self) -> Vec<(T, T)> {
        self.layers.iter().map(|l| (l.tau, l.z)).collect()
    }

    pub fn layer(&self, j: usize) -> SolverResult<&LayerState<T>> {
        self.layers.get(j).ok_or(SolverError::MissingLayer {
            layer: j,
            available: self.layers.len(),
        })
    }

    /// Boundary ratio at the stored layer nearest to `tau`.
    pub fn rho_at(&self, tau: T) -> T {
        self.layers[self.grid.nearest_layer(tau)].z
    }

    pub fn max_iterations(&self) -> usize {
        self.diagnostics.iter().map(|d| d.iterations).max().unwrap_or(0)
    }

    pub fn total_iterations(&self) -> usize {
        self.diagnostics.iter().map(|d| d.iterations).sum()
    }

    /// Smallest and largest `y_i^j` over the whole surface.
    pub fn value_range(&self) -> (T, T) {
        self.layers
            .iter()
            .flat_map(|l| l.y.iter())
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Runs the selected engine.
pub fn solve<T: Real>(
    p: &MarketParams<T>,
    g: &GridSpec<T>,
    engine: Engine,
    settings: &SolverSettings<T>,
) -> SolverResult<SolveResult<T>> {
    match engine {
        Engine::Newton => march_newton(p, g, settings.mode, &settings.newton),
        Engine::PredictorCorrector => march_pc(p, g, settings.mode, &settings.predictor),
    }
}
