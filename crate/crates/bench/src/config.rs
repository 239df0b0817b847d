//! Experiment configuration: flat `key = value` files, named presets and
//! command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sparsepg::{
    Equation, Mesh, PenaltyKind, PenaltySpec, ReducedProblem, SolverConfig, StepMode,
};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// Poisson state, `|u|^p` penalty.
    Linear,
    /// `-Δy + y^3 = u`, `|u|^p` penalty.
    Semilinear,
    /// Poisson state, integer-valued controls.
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Backtracking,
    Fixed,
}

/// Known desired states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// `10 x sin(5x) cos(7y)`
    Example1,
    /// `4 sin(2πx) sin(πy) e^x`
    Example2,
    Zero,
}

impl Target {
    pub fn eval(self, x: f64, y: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            Target::Example1 => 10.0 * x * (5.0 * x).sin() * (7.0 * y).cos(),
            Target::Example2 => 4.0 * (2.0 * PI * x).sin() * (PI * y).sin() * x.exp(),
            Target::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Example1,
    Example2,
    Example3,
    BadParams,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Example1, Preset::Example2, Preset::Example3, Preset::BadParams];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
            Preset::Example3 => "example3",
            Preset::BadParams => "bad-params",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| BenchError::Config(format!("unknown preset '{name}'")))
    }

    pub fn config(self) -> ExperimentConfig {
        let base = ExperimentConfig::default();
        match self {
            Preset::Example1 => base,
            Preset::Example2 => ExperimentConfig {
                problem: ProblemKind::Semilinear,
                alpha: 0.002,
                beta: 0.03,
                b: 12.0,
                l0: 1e-3,
                target: Target::Example2,
                ..base
            },
            Preset::Example3 => ExperimentConfig {
                problem: ProblemKind::Integer,
                b: 2.0,
                l0: 1e-3,
                ..base
            },
            Preset::BadParams => ExperimentConfig {
                alpha: 0.001,
                p: 0.9,
                b: 6.0,
                l0: 0.005,
                ..base
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything needed to reproduce one run. Defaults are the Example 1 data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    /// Cells per side; `h = sqrt(2)/n`.
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    /// Box bound; `inf` is accepted.
    pub b: f64,
    pub mode: ModeKind,
    /// Initial `L` for backtracking, or the fixed `L`.
    pub l0: f64,
    pub theta: f64,
    pub eta: f64,
    pub stop_tol: f64,
    pub step_tol: Option<f64>,
    pub max_iter: usize,
    pub target: Target,
    pub output_dir: PathBuf,
    /// Seed for the random directions of the gradient check.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Linear,
            n: 160,
            alpha: 0.01,
            beta: 0.01,
            p: 0.5,
            b: 4.0,
            mode: ModeKind::Backtracking,
            l0: 1e-4,
            theta: 0.5,
            eta: 1e-4,
            stop_tol: 1e-12,
            step_tol: None,
            max_iter: 5000,
            target: Target::Example1,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Parses a config file body. Missing keys take the defaults of `base`.
    pub fn from_toml_str(text: &str, base: &ExperimentConfig) -> Result<Self> {
        let overrides: toml::Table =
            text.parse().map_err(|e: toml::de::Error| BenchError::Config(e.to_string()))?;
        base.with_table(overrides)
    }

    pub fn from_file(path: &Path, base: &ExperimentConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, base)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies `key=value` overrides; values use the config file syntax.
    pub fn with_overrides(&self, pairs: &[String]) -> Result<Self> {
        let mut table = toml::Table::new();
        for pair in pairs {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("override '{pair}' is not key=value")))?;
            let key = key.trim();
            let parsed: toml::Table = format!("{key} = {}", quote_if_bare(value.trim()))
                .parse()
                .map_err(|e: toml::de::Error| BenchError::Config(format!("override '{pair}': {e}")))?;
            table.extend(parsed);
        }
        self.with_table(table)
    }

    fn with_table(&self, overrides: toml::Table) -> Result<Self> {
        let mut merged = toml::Table::try_from(self).map_err(|e| BenchError::Config(e.to_string()))?;
        merged.extend(overrides);
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(BenchError::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.l0 > 0.0 && self.l0.is_finite()) {
            return Err(BenchError::Config(format!("l0 must be positive, got {}", self.l0)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(BenchError::Config(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if !(self.eta > 0.0) || !(self.stop_tol > 0.0) {
            return Err(BenchError::Config("eta and stop_tol must be positive".into()));
        }
        if !(self.beta > 0.0) {
            return Err(BenchError::Config(format!("beta must be positive, got {}", self.beta)));
        }
        self.penalty()?;
        Ok(())
    }

    pub fn penalty(&self) -> Result<PenaltySpec> {
        let kind = match self.problem {
            ProblemKind::Linear | ProblemKind::Semilinear => PenaltyKind::LpPower { p: self.p },
            ProblemKind::Integer => PenaltyKind::IntegerIndicator,
        };
        PenaltySpec::new(kind, self.b, self.alpha, self.beta).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn equation(&self) -> Equation {
        match self.problem {
            ProblemKind::Semilinear => Equation::Semilinear,
            ProblemKind::Linear | ProblemKind::Integer => Equation::Linear,
        }
    }

    pub fn problem(&self) -> Result<ReducedProblem> {
        let mesh = Mesh::new(self.n).map_err(|e| BenchError::Config(e.to_string()))?;
        let target = self.target;
        Ok(ReducedProblem::new(mesh, self.equation(), move |x, y| target.eval(x, y)))
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mode = match self.mode {
            ModeKind::Backtracking => StepMode::Backtracking {
                l0: self.l0,
                theta: self.theta,
                eta: self.eta,
            },
            ModeKind::Fixed => StepMode::FixedL(self.l0),
        };
        let mut cfg = SolverConfig::new(mode, self.penalty()?);
        cfg.stop_tol = self.stop_tol;
        cfg.step_tol = self.step_tol;
        cfg.max_iter = self.max_iter;
        cfg.record_omega = true;
        Ok(cfg)
    }

    /// The `N_p` exponent: `p` for power penalties, 0 (support measure) otherwise.
    pub fn np_exponent(&self) -> f64 {
        match self.problem {
            ProblemKind::Integer => 0.0,
            _ => self.p,
        }
    }
}

/// Lets `target=example2` and `problem=integer` be written without quotes.
fn quote_if_bare(value: &str) -> String {
    let bare = value.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && !matches!(value, "true" | "false" | "inf" | "nan");
    if bare {
        format!("\"{value}\"")
    } else {
        value.to_string()
    }
}
