//! The TOML experiment configuration and its translation into core types.
//!
//! One file describes one experiment family: the objective, the oracle kind
//! with its parameters and the sweep levels, the stepsize rule, and the run
//! block (initial points, seeds, budget, probe settings, output directory).
//! Unknown keys are rejected so a typo cannot silently fall back to a
//! default, and a written config parses back to an identical value.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sgdlab_core::noise::NoiseOracle;
use sgdlab_core::objective::{cosine_staircase, quadratic_bowl, ObjectiveSpec};
use sgdlab_core::schedule::{matched_stepsize, StepSchedule};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSection,
    pub oracle: OracleSection,
    pub schedule: ScheduleSection,
    pub run: RunSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub kind: ObjectiveKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// The piecewise cosine benchmark with the four-component catalog.
    CosineStaircase,
    /// A plain quadratic bowl, useful for smoke tests.
    QuadraticBowl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub kind: OracleKindConfig,
    /// Multiplicative level of the `e1` factor.
    #[serde(default = "default_b")]
    pub b: f64,
    /// Additive scale of `sigma_k = sigma / (k+1)^(1+eps)`.
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_eps")]
    pub eps_exp: f64,
    /// Sweep values for `table`: substituted for `b` (multiplicative) or
    /// `sigma` (additive, value-dependent). Optional; defaults to the single
    /// configured value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKindConfig {
    Exact,
    Multiplicative,
    AdditiveGaussian,
    ValueDependent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub rule: StepsizeRule,
    /// Explicit stepsize; required by the `constant` rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// The `level-matched` rule sets
    /// `alpha = 1 / (level_factor * b * beta)`.
    #[serde(default = "default_level_factor")]
    pub level_factor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepsizeRule {
    /// `alpha = 1 / (level_factor * b * beta)` with the current level's `b`.
    LevelMatched,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Initial points of the experiment grid.
    pub x0: Vec<f64>,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: u64,
    #[serde(default = "default_k_max")]
    pub k_max: u64,
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_grad_tol: Option<f64>,
    #[serde(default = "default_stop_window")]
    pub stop_window: u64,
    /// Event level the descent-event probes compare against.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Draw count for Monte-Carlo probes.
    #[serde(default = "default_n_draws")]
    pub n_draws: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Classification tolerances.
    #[serde(default = "default_tol_dist")]
    pub tol_dist: f64,
    #[serde(default = "default_tol_grad")]
    pub tol_grad: f64,
}

fn default_b() -> f64 {
    10.0
}
fn default_eps() -> f64 {
    0.1
}
fn default_level_factor() -> f64 {
    1.0
}
fn default_n_seeds() -> u64 {
    100
}
fn default_k_max() -> u64 {
    1_000_000
}
fn default_stride() -> u64 {
    1_000
}
fn default_stop_window() -> u64 {
    100
}
fn default_gamma() -> f64 {
    0.9
}
fn default_n_draws() -> usize {
    100_000
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_tol_dist() -> f64 {
    1e-3
}
fn default_tol_grad() -> f64 {
    1e-4
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> CliResult<()> {
        if self.run.x0.is_empty() {
            return Err(CliError::config("run.x0 must list at least one initial point"));
        }
        if let Some(levels) = &self.oracle.levels {
            if levels.is_empty() {
                return Err(CliError::config("oracle.levels must not be empty when present"));
            }
        }
        match self.schedule.rule {
            StepsizeRule::Constant if self.schedule.alpha.is_none() => {
                Err(CliError::config("schedule.alpha is required with the constant rule"))
            }
            _ => Ok(()),
        }
    }

    pub fn objective(&self) -> ObjectiveSpec {
        match self.objective.kind {
            ObjectiveKind::CosineStaircase => cosine_staircase(),
            ObjectiveKind::QuadraticBowl => quadratic_bowl(),
        }
    }

    /// The sweep cells of the noise level. `None` marks the exact oracle,
    /// which has no level.
    pub fn levels(&self) -> Vec<Option<f64>> {
        if self.oracle.kind == OracleKindConfig::Exact {
            return vec![None];
        }
        match &self.oracle.levels {
            Some(levels) => levels.iter().copied().map(Some).collect(),
            None => {
                let v = match self.oracle.kind {
                    OracleKindConfig::Multiplicative => self.oracle.b,
                    _ => self.oracle.sigma,
                };
                vec![Some(v)]
            }
        }
    }

    /// The multiplicative level `b` effective at a sweep cell.
    fn b_at(&self, level: Option<f64>) -> f64 {
        match (self.oracle.kind, level) {
            (OracleKindConfig::Multiplicative, Some(l)) => l,
            _ => self.oracle.b,
        }
    }

    fn sigma_at(&self, level: Option<f64>) -> f64 {
        match (self.oracle.kind, level) {
            (OracleKindConfig::AdditiveGaussian | OracleKindConfig::ValueDependent, Some(l)) => l,
            _ => self.oracle.sigma,
        }
    }

    /// Resolved stepsize at a sweep cell.
    pub fn alpha_at(&self, level: Option<f64>, beta: f64) -> f64 {
        match self.schedule.rule {
            StepsizeRule::Constant => self.schedule.alpha.expect("validated"),
            StepsizeRule::LevelMatched => {
                matched_stepsize(self.schedule.level_factor * self.b_at(level), beta)
            }
        }
    }

    /// Builds the oracle for one sweep cell.
    pub fn oracle_at(&self, level: Option<f64>, beta: f64) -> CliResult<NoiseOracle> {
        let b = self.b_at(level);
        let sigma = self.sigma_at(level);
        let eps = self.oracle.eps_exp;
        let oracle = match self.oracle.kind {
            OracleKindConfig::Exact => Ok(NoiseOracle::exact()),
            OracleKindConfig::Multiplicative => NoiseOracle::multiplicative(b),
            OracleKindConfig::AdditiveGaussian => NoiseOracle::additive_gaussian(b, sigma, eps),
            OracleKindConfig::ValueDependent => {
                NoiseOracle::value_dependent(b, sigma, eps, self.alpha_at(level, beta))
            }
        };
        oracle.map_err(CliError::from)
    }

    /// Builds the schedule for one sweep cell.
    pub fn schedule_at(&self, level: Option<f64>, beta: f64) -> CliResult<StepSchedule> {
        let oracle = self.oracle_at(level, beta)?;
        StepSchedule::for_oracle(self.alpha_at(level, beta), beta, &oracle)
            .map_err(CliError::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[objective]
kind = "cosine-staircase"

[oracle]
kind = "multiplicative"
b = 10.0
levels = [10.0, 1000.0]

[schedule]
rule = "level-matched"

[run]
x0 = [-0.5, 1.0]
seed = 7001
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::parse(EXAMPLE).unwrap();
        let text = cfg.to_toml();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = EXAMPLE.replace("[run]", "[run]\nbanana = 1");
        let err = ExperimentConfig::parse(&bad).unwrap_err();
        assert!(err.to_string().contains("banana"), "{err}");
    }

    #[test]
    fn constant_rule_requires_alpha() {
        let bad = EXAMPLE.replace("rule = \"level-matched\"", "rule = \"constant\"");
        assert!(ExperimentConfig::parse(&bad).is_err());
        let good = EXAMPLE.replace(
            "rule = \"level-matched\"",
            "rule = \"constant\"\nalpha = 0.01",
        );
        let cfg = ExperimentConfig::parse(&good).unwrap();
        assert_eq!(cfg.alpha_at(Some(10.0), 2.0), 0.01);
    }

    #[test]
    fn level_matched_alpha_tracks_the_level() {
        let cfg = ExperimentConfig::parse(EXAMPLE).unwrap();
        assert_eq!(cfg.alpha_at(Some(10.0), 2.0), 0.05);
        assert_eq!(cfg.alpha_at(Some(1000.0), 2.0), 5e-4);
    }

    #[test]
    fn levels_default_to_the_configured_value() {
        let no_levels = EXAMPLE.replace("levels = [10.0, 1000.0]\n", "");
        let cfg = ExperimentConfig::parse(&no_levels).unwrap();
        assert_eq!(cfg.levels(), vec![Some(10.0)]);
    }

    #[test]
    fn sigma_levels_leave_b_alone() {
        let add = EXAMPLE
            .replace("kind = \"multiplicative\"", "kind = \"additive-gaussian\"\nsigma = 10.0")
            .replace("levels = [10.0, 1000.0]", "levels = [10.0, 100.0]");
        let cfg = ExperimentConfig::parse(&add).unwrap();
        let o = cfg.oracle_at(Some(100.0), 2.0).unwrap();
        assert_eq!(o.level_b(), 10.0);
        assert_eq!(o.sigma(), 100.0);
        // alpha matched against b, not the sigma sweep
        assert_eq!(cfg.alpha_at(Some(100.0), 2.0), 0.05);
    }
}
