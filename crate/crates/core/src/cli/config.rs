//! Run configuration: defaults, flat `key = value` files, environment, flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::CliError;
use crate::mesh::GridSpec;
use crate::model::MarketParams;
use crate::scheme::SchemeMode;
use crate::solution::{Engine, SolverSettings};
use crate::solver_newton::NewtonConfig;
use crate::solver_pc::{NoBracketPolicy, PredictorConfig, ReactionTerm};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "ASIANFB_OUT";

/// Fully resolved configuration of one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub market: MarketParams<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    /// `None` means `ceil(2.5 N)`.
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// `None` means `5 ln rho(0)`.
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub eps_final: f64,
    pub engine: Engine,
    pub scheme_mode: SchemeMode,
    pub newton: NewtonConfig<f64>,
    pub predictor: PredictorConfig<f64>,
    pub tau_probes: Vec<f64>,
    /// Worker threads for `refine`; `None` uses every core.
    pub jobs: Option<usize>,
    pub base_n: usize,
    pub levels: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
    #[serde(skip)]
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            market: MarketParams::reference(),
            n: 200,
            m: None,
            l: None,
            eps_final: crate::mesh::DEFAULT_EPS_FINAL,
            engine: Engine::Newton,
            scheme_mode: SchemeMode::UpwindSingular,
            newton: NewtonConfig::default(),
            predictor: PredictorConfig::default(),
            tau_probes: vec![10.0, 20.0, 40.0],
            jobs: None,
            base_n: 50,
            levels: 5,
            out_dir: PathBuf::from("."),
            timing: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::Config(format!("bad value '{value}' for {key}: {e}")))
}

pub fn parse_probes(value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse::<f64>("tau_probes", s))
        .collect()
}

fn parse_no_bracket(value: &str) -> Result<NoBracketPolicy, CliError> {
    match value.trim() {
        "hold" | "hold-previous" => Ok(NoBracketPolicy::HoldPrevious),
        "fail" => Ok(NoBracketPolicy::Fail),
        other => Err(CliError::Config(format!(
            "pc_no_bracket must be hold or fail, got '{other}'"
        ))),
    }
}

fn parse_reaction(value: &str) -> Result<ReactionTerm, CliError> {
    match value.trim() {
        "explicit" => Ok(ReactionTerm::Explicit),
        "implicit" => Ok(ReactionTerm::Implicit),
        other => Err(CliError::Config(format!(
            "pc_reaction must be explicit or implicit, got '{other}'"
        ))),
    }
}

impl RunConfig {
    /// Sets one option by its config-file key. Dashes and underscores are
    /// interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let k = key.trim().replace('-', "_");
        match k.as_str() {
            "r" => self.market.rate = parse(key, value)?,
            "q" => self.market.dividend = parse(key, value)?,
            "sigma" => self.market.sigma = parse(key, value)?,
            "T" => self.market.maturity = parse(key, value)?,
            "N" => self.n = parse(key, value)?,
            "M" => self.m = Some(parse(key, value)?),
            "L" => self.l = Some(parse(key, value)?),
            "eps_final" => self.eps_final = parse(key, value)?,
            "engine" => self.engine = value.parse().map_err(CliError::Config)?,
            "scheme_mode" => self.scheme_mode = value.parse().map_err(CliError::Config)?,
            "tol" => self.newton.tol = parse(key, value)?,
            "max_iter" => self.newton.max_iter = parse(key, value)?,
            "tau_probes" => self.tau_probes = parse_probes(value)?,
            "jobs" => self.jobs = Some(parse(key, value)?),
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "base_n" => self.base_n = parse(key, value)?,
            "levels" => self.levels = parse(key, value)?,
            "pc_root_tol" => self.predictor.root_tol = parse(key, value)?,
            "pc_max_iter" => self.predictor.max_iter = parse(key, value)?,
            "pc_bracket_factor" => self.predictor.bracket_factor = parse(key, value)?,
            "pc_reaction" => self.predictor.reaction = parse_reaction(value)?,
            "pc_no_bracket" => self.predictor.on_no_bracket = parse_no_bracket(value)?,
            _ => return Err(CliError::Config(format!("unknown option '{key}'"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_file_contents(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key, value)
                .map_err(|e| CliError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_file_contents(&text)
    }

    pub fn apply_env(&mut self) {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                self.out_dir = PathBuf::from(dir);
            }
        }
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<(), CliError> {
        self.market.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.newton.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.predictor.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.grid()?;
        if let Some(0) = self.jobs {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        for &tau in &self.tau_probes {
            if !(tau > 0.0 && tau < self.market.maturity) {
                return Err(CliError::Config(format!(
                    "probe time {tau} outside (0, {})",
                    self.market.maturity
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec<f64>, CliError> {
        GridSpec::for_params(&self.market, self.n, self.m, self.l, Some(self.eps_final))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn settings(&self) -> SolverSettings<f64> {
        SolverSettings {
            mode: self.scheme_mode,
            newton: self.newton,
            predictor: self.predictor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.n, c.grid().unwrap().layers()), (200, 500));
        assert_eq!(c.market, MarketParams::reference());
        assert_eq!(c.scheme_mode, SchemeMode::UpwindSingular);
        assert_eq!(c.engine, Engine::Newton);
        assert_eq!(c.eps_final, 1e-7);
    }

    #[test]
    fn file_with_comments() {
        let mut c = RunConfig::default();
        c.apply_file_contents(
            "# header\nN = 100  # finer later\n\nengine=pc\nscheme-mode = central\ntau_probes = 5, 15\n",
        )
        .unwrap();
        assert_eq!(c.n, 100);
        assert_eq!(c.grid().unwrap().layers(), 250);
        assert_eq!(c.engine, Engine::PredictorCorrector);
        assert_eq!(c.scheme_mode, SchemeMode::Central);
        assert_eq!(c.tau_probes, vec![5.0, 15.0]);
    }

    #[test]
    fn file_errors_name_the_line() {
        let mut c = RunConfig::default();
        let e = c.apply_file_contents("N = 10\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(c.apply_file_contents("sigma 0.3").is_err());
        assert!(c.apply_file_contents("N = ten").is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        c.market.sigma = -0.1;
        assert!(c.validate().is_err());
        let c = RunConfig {
            tau_probes: vec![60.0],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            n: 2,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
