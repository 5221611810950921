//! Scenario config documents (TOML).
//!
//! ```toml
//! layout = "../layouts/layout_b.txt"   # relative to this file
//! agent = "hybrid"                      # or "classical"
//! gamma = 0.05
//! beta = 1.0                            # optional
//! eta = 0.05                            # optional
//! runs = 100                            # optional
//! seed = 1                              # optional
//! hard_cap = 100000                     # optional
//! max_non_terminating = 0.01            # optional, fraction of runs
//!
//! [[phases]]
//! route = 0
//! fixed_episodes = 100
//!
//! [[phases]]
//! route = 1
//! k_out_of_n = { k = 4, n = 5 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{load_layout, GridLayout, LayoutParseError};
use crate::experiments::{
    AgentKind, ExperimentError, PhaseSpec, Scenario, ScenarioConfig, StoppingCriterion,
    DEFAULT_HARD_CAP,
};
use crate::ps::PsParams;

pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_MAX_NON_TERMINATING: f64 = 0.01;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: String, message: String },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("layout {path}: {source}")]
    Layout {
        path: PathBuf,
        source: LayoutParseError,
    },
    #[error("{0}")]
    Scenario(#[from] ExperimentError),
}

fn field(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub layout: String,
    pub agent: String,
    pub gamma: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hard_cap")]
    pub hard_cap: u64,
    #[serde(default = "default_max_non_terminating")]
    pub max_non_terminating: f64,
    pub phases: Vec<RawPhase>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawPhase {
    pub route: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_episodes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_out_of_n: Option<RawKOutOfN>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawKOutOfN {
    pub k: u32,
    pub n: u32,
}

fn default_beta() -> f64 {
    PsParams::DEFAULT_BETA
}
fn default_eta() -> f64 {
    PsParams::DEFAULT_ETA
}
fn default_runs() -> usize {
    DEFAULT_RUNS
}
fn default_hard_cap() -> u64 {
    DEFAULT_HARD_CAP
}
fn default_max_non_terminating() -> f64 {
    DEFAULT_MAX_NON_TERMINATING
}

/// Command-line replacements applied to the document before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub agent: Option<String>,
    pub gamma: Option<f64>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Syntax {
            path: "<document>".into(),
            message: e.to_string(),
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::Syntax {
                path: if path == "." { "<document>".into() } else { path },
                message: e.into_inner().to_string().trim_end().to_string(),
            }
        })
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(runs) = overrides.runs {
            self.runs = runs;
        }
        if let Some(agent) = &overrides.agent {
            self.agent = agent.clone();
        }
        if let Some(gamma) = overrides.gamma {
            self.gamma = gamma;
        }
    }

    /// Field-level checks; route indices are checked against the layout
    /// later.
    pub fn to_scenario_config(&self) -> Result<ScenarioConfig, ConfigError> {
        let agent = AgentKind::from_name(&self.agent).ok_or_else(|| {
            field(
                "agent",
                format!("unknown agent {:?}, expected \"classical\" or \"hybrid\"", self.agent),
            )
        })?;
        check_unit("gamma", self.gamma)?;
        check_unit("eta", self.eta)?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(field("beta", format!("{} is outside the legal range [0, inf)", self.beta)));
        }
        check_unit("max_non_terminating", self.max_non_terminating)?;
        if self.runs == 0 {
            return Err(field("runs", "must be at least 1"));
        }
        if self.hard_cap == 0 {
            return Err(field("hard_cap", "must be at least 1"));
        }
        if self.phases.is_empty() {
            return Err(field("phases", "at least one phase is required"));
        }
        let phases = self
            .phases
            .iter()
            .enumerate()
            .map(|(i, p)| p.to_spec(i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScenarioConfig {
            agent,
            beta: self.beta,
            gamma: self.gamma,
            eta: self.eta,
            phases,
            runs: self.runs,
            seed: self.seed,
            hard_cap: self.hard_cap,
        })
    }
}

impl RawPhase {
    fn to_spec(&self, index: usize) -> Result<PhaseSpec, ConfigError> {
        let at = |name: &str| format!("phases[{index}].{name}");
        let stopping = match (self.fixed_episodes, self.k_out_of_n) {
            (Some(_), Some(_)) => {
                return Err(field(
                    format!("phases[{index}]"),
                    "give either fixed_episodes or k_out_of_n, not both",
                ))
            }
            (None, None) => {
                return Err(field(
                    format!("phases[{index}]"),
                    "missing stopping criterion (fixed_episodes or k_out_of_n)",
                ))
            }
            (Some(0), None) => return Err(field(at("fixed_episodes"), "must be at least 1")),
            (Some(n), None) => StoppingCriterion::FixedEpisodes(n),
            (None, Some(RawKOutOfN { k, n })) => {
                if k == 0 || k > n {
                    return Err(field(
                        at("k_out_of_n"),
                        format!("needs 1 <= k <= n, got k={k}, n={n}"),
                    ));
                }
                StoppingCriterion::KOutOfN { k, n }
            }
        };
        Ok(PhaseSpec {
            route: self.route,
            stopping,
        })
    }
}

fn check_unit(name: &str, value: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(field(name, format!("{value} is outside the legal range [0, 1]")))
    }
}

/// A config resolved against its file system location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub raw: RawConfig,
    pub layout_path: PathBuf,
    pub scenario: Scenario,
}

impl LoadedConfig {
    pub fn max_non_terminating(&self) -> f64 {
        self.raw.max_non_terminating
    }
}

pub fn read_layout(path: &Path) -> Result<GridLayout, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    load_layout(&name, &text).map_err(|source| ConfigError::Layout {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses `text`, applies `overrides`, resolves the layout relative to
/// `base_dir` and validates everything, including oracle enumeration.
pub fn resolve_config(
    text: &str,
    base_dir: &Path,
    overrides: &Overrides,
) -> Result<LoadedConfig, ConfigError> {
    let mut raw = RawConfig::parse(text)?;
    raw.apply(overrides);
    let config = raw.to_scenario_config()?;
    let layout_path = base_dir.join(&raw.layout);
    let layout = read_layout(&layout_path)?;
    for (i, phase) in config.phases.iter().enumerate() {
        if phase.route >= layout.routes().len() {
            return Err(field(
                format!("phases[{i}].route"),
                format!(
                    "route {} does not exist, layout has {} route(s)",
                    phase.route,
                    layout.routes().len()
                ),
            ));
        }
    }
    let scenario = Scenario::new(config, layout)?;
    Ok(LoadedConfig {
        raw,
        layout_path,
        scenario,
    })
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    resolve_config(&text, base, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
layout = "x.txt"
agent = "classical"
gamma = 0.02

[[phases]]
route = 0
fixed_episodes = 250
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let raw = RawConfig::parse(MINIMAL).unwrap();
        let cfg = raw.to_scenario_config().unwrap();
        assert_eq!(cfg.agent, AgentKind::Classical);
        assert_eq!((cfg.beta, cfg.eta, cfg.gamma), (1.0, 0.05, 0.02));
        assert_eq!(cfg.hard_cap, 100_000);
        assert_eq!(cfg.runs, DEFAULT_RUNS);
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(raw.max_non_terminating, 0.01);
        assert_eq!(
            cfg.phases,
            vec![PhaseSpec {
                route: 0,
                stopping: StoppingCriterion::FixedEpisodes(250)
            }]
        );
    }

    #[test]
    fn gamma_out_of_range_names_field() {
        let text = MINIMAL.replace("0.02", "1.5");
        let err = RawConfig::parse(&text).unwrap().to_scenario_config().unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("gamma:"), "{msg}");
        assert!(msg.contains("[0, 1]"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = RawConfig::parse(&format!("gama = 0.1\n{MINIMAL}")).unwrap_err();
        assert!(err.to_string().contains("gama"), "{err}");

        let text = MINIMAL.replace("fixed_episodes = 250", "fixed_episodes = 250\nroutes = 1");
        let err = RawConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("phases[0]") && err.contains("routes"), "{err}");
    }

    #[test]
    fn missing_layout_is_reported() {
        let text = MINIMAL.replace("layout = \"x.txt\"\n", "");
        let err = RawConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("layout"), "{err}");
    }

    #[test]
    fn phase_criteria_are_exclusive() {
        let both = MINIMAL.replace(
            "fixed_episodes = 250",
            "fixed_episodes = 250\nk_out_of_n = { k = 4, n = 5 }",
        );
        let err = RawConfig::parse(&both).unwrap().to_scenario_config().unwrap_err();
        assert!(err.to_string().starts_with("phases[0]"), "{err}");
        let bad = MINIMAL.replace("fixed_episodes = 250", "k_out_of_n = { k = 6, n = 5 }");
        let err = RawConfig::parse(&bad).unwrap().to_scenario_config().unwrap_err();
        assert!(err.to_string().starts_with("phases[0].k_out_of_n"), "{err}");
    }

    #[test]
    fn overrides_replace_fields_before_validation() {
        let mut raw = RawConfig::parse(&MINIMAL.replace("0.02", "7.0")).unwrap();
        raw.apply(&Overrides {
            seed: Some(9),
            runs: Some(3),
            agent: Some("hybrid".into()),
            gamma: Some(0.1),
        });
        let cfg = raw.to_scenario_config().unwrap();
        assert_eq!((cfg.seed, cfg.runs, cfg.agent, cfg.gamma), (9, 3, AgentKind::Hybrid, 0.1));
    }
}
