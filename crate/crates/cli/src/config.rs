//! JSON run configuration. Every field is optional; [`RunConfig::resolve`]
//! fills the defaults and the resolved document is what gets echoed next to
//! the results.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rvpinn_core::mlp::BcMode;
use rvpinn_core::problem::{Benchmark, Problem};
use rvpinn_core::testspace::TestSpace;
use rvpinn_core::trainer::TrainConfig;

use crate::CliError;

pub const DEFAULT_OUTPUT_DIR: &str = "rvpinn-out";
pub const DEFAULT_DIMENSION: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: Benchmark,
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            kind: Benchmark::Smooth,
            epsilon: None,
            beta: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Fe,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceConfig {
    pub kind: SpaceKind,
    pub dimension: usize,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self {
            kind: SpaceKind::Spectral,
            dimension: DEFAULT_DIMENSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub space: SpaceConfig,
    pub bc: BcMode,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::default(),
            space: SpaceConfig::default(),
            bc: BcMode::Strong,
            train: TrainConfig::default(),
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    /// Fills unset ε/β from the benchmark and checks everything that can be
    /// checked without training.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let kind = self.problem.kind;
        self.problem.epsilon.get_or_insert(kind.default_epsilon());
        self.problem.beta.get_or_insert(kind.default_beta());
        let eps = self.problem.epsilon.unwrap_or_default();
        let beta = self.problem.beta.unwrap_or_default();
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(CliError::Config(format!("problem.epsilon must be > 0, got {eps}")));
        }
        if !beta.is_finite() {
            return Err(CliError::Config(format!("problem.beta must be finite, got {beta}")));
        }
        if self.space.dimension == 0 {
            return Err(CliError::Config("space.dimension must be >= 1".into()));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(CliError::Config("output_dir must not be empty".into()));
        }
        self.train.validate().map_err(config_err)?;
        self.build_problem()?;
        self.build_space()?;
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.problem
            .epsilon
            .unwrap_or_else(|| self.problem.kind.default_epsilon())
    }

    pub fn beta(&self) -> f64 {
        self.problem
            .beta
            .unwrap_or_else(|| self.problem.kind.default_beta())
    }

    pub fn build_problem(&self) -> Result<Problem, CliError> {
        Problem::benchmark(self.problem.kind, self.epsilon(), self.beta(), self.bc).map_err(config_err)
    }

    pub fn build_space(&self) -> Result<TestSpace, CliError> {
        match self.space.kind {
            SpaceKind::Fe => TestSpace::finite_element(self.space.dimension),
            SpaceKind::Spectral => TestSpace::spectral(self.space.dimension, self.epsilon()),
        }
        .map_err(config_err)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn config_err(e: rvpinn_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gets_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap().resolve().unwrap();
        assert_eq!(cfg.problem.kind, Benchmark::Smooth);
        assert_eq!(cfg.problem.epsilon, Some(1.0));
        assert_eq!(cfg.problem.beta, Some(0.0));
        assert_eq!(cfg.space, SpaceConfig::default());
        assert_eq!(cfg.bc, BcMode::Strong);
        assert_eq!(cfg.train, TrainConfig::default());
    }

    #[test]
    fn advection_defaults() {
        let cfg = RunConfig::from_json(r#"{"problem": {"kind": "advection"}, "bc": "constrained"}"#)
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(cfg.problem.epsilon, Some(0.1));
        assert_eq!(cfg.problem.beta, Some(1.0));
        assert_eq!(cfg.bc, BcMode::Constrained);
    }

    #[test]
    fn echo_round_trip() {
        let cfg = RunConfig::from_json(
            r#"{"problem": {"kind": "delta"}, "space": {"kind": "fe", "dimension": 100},
                "train": {"max_epochs": 7, "seed": 3}, "output_dir": "x"}"#,
        )
        .unwrap()
        .resolve()
        .unwrap();
        let again = RunConfig::from_json(&cfg.to_json()).unwrap().resolve().unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        for text in [
            r#"{"problme": {}}"#,
            r#"{"train": {"lr": 1.0}}"#,
            r#"{"space": {"kind": "fourier"}}"#,
            r#"{"bc": "weak"}"#,
        ] {
            let err = RunConfig::from_json(text).unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{text}");
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = RunConfig::from_json("{\n  \"bc\": \"strong\",\n}").unwrap_err();
        assert!(err.message().contains("line 3"), "{}", err.message());
    }

    #[test]
    fn invalid_values_name_the_field() {
        for (text, field) in [
            (r#"{"problem": {"epsilon": -1.0}}"#, "epsilon"),
            (r#"{"space": {"dimension": 0}}"#, "space.dimension"),
            (r#"{"train": {"learning_rate": 0.0}}"#, "learning_rate"),
            (r#"{"train": {"architecture": [2, 3, 1]}}"#, "architecture"),
        ] {
            let err = RunConfig::from_json(text).unwrap().resolve().unwrap_err();
            assert!(err.message().contains(field), "{}", err.message());
        }
    }
}
