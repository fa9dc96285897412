//! Scenario configuration: a TOML document validated against the catalog.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::{self, ScenarioId, ScenarioInfo};

/// Validation failure, located by a dotted field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Quadrature parameters; unset fields take the scenario defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    /// Gauss-Legendre points per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Monte-Carlo sample count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    #[serde(default)]
    pub seed: u64,
    /// Small integer dimensions, keyed as in the scenario catalog.
    #[serde(default)]
    pub dims: BTreeMap<String, usize>,
    #[serde(default)]
    pub scheme: SchemeConfig,
    /// Tolerance overrides, keyed as in the scenario catalog.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Flow times; empty means the scenario default.
    #[serde(default)]
    pub t_schedule: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Configuration with every field at its scenario default.
    pub fn default_for(scenario: ScenarioId) -> Self {
        ScenarioConfig {
            scenario,
            seed: 0,
            dims: BTreeMap::new(),
            scheme: SchemeConfig::default(),
            tolerances: BTreeMap::new(),
            t_schedule: Vec::new(),
            output_path: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let path = e.span().map(|s| locate(text, s.start)).unwrap_or_default();
            ConfigError::new(path, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn info(&self) -> &'static ScenarioInfo {
        catalog::info(self.scenario)
    }

    /// Checks every field against the scenario's documented bounds.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let info = self.info();
        for (key, &value) in &self.dims {
            let spec = info
                .dims
                .iter()
                .find(|d| d.key == key)
                .ok_or_else(|| ConfigError::new(format!("dims.{key}"), format!("unknown dimension for scenario {}", info.id)))?;
            if value < spec.min || value > spec.max {
                return Err(ConfigError::new(format!("dims.{key}"), format!("{value} outside [{}, {}]", spec.min, spec.max)));
            }
        }
        for (key, &value) in &self.tolerances {
            if !info.tolerances.iter().any(|(k, _)| k == key) {
                return Err(ConfigError::new(format!("tolerances.{key}"), format!("unknown tolerance for scenario {}", info.id)));
            }
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::new(format!("tolerances.{key}"), "must be positive and finite"));
            }
        }
        if let Some(p) = self.scheme.points {
            if !(2..=64).contains(&p) {
                return Err(ConfigError::new("scheme.points", format!("{p} outside [2, 64]")));
            }
        }
        if let Some(s) = self.scheme.samples {
            if !(100..=50_000_000).contains(&s) {
                return Err(ConfigError::new("scheme.samples", format!("{s} outside [100, 50000000]")));
            }
        }
        for (i, &t) in self.t_schedule.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(ConfigError::new(format!("t_schedule[{i}]"), "flow times must be positive and finite"));
            }
            if i > 0 && t <= self.t_schedule[i - 1] {
                return Err(ConfigError::new(format!("t_schedule[{i}]"), "schedule must be strictly increasing"));
            }
        }
        if !self.t_schedule.is_empty() && self.t_schedule.len() < 2 {
            return Err(ConfigError::new("t_schedule", "needs at least two times"));
        }
        Ok(())
    }

    pub fn dim(&self, key: &str) -> usize {
        self.dims.get(key).copied().unwrap_or_else(|| {
            self.info().dims.iter().find(|d| d.key == key).unwrap_or_else(|| panic!("catalog lacks dimension {key}")).default
        })
    }

    pub fn tol(&self, key: &str) -> f64 {
        self.tolerances.get(key).copied().unwrap_or_else(|| {
            self.info().tolerances.iter().find(|(k, _)| *k == key).unwrap_or_else(|| panic!("catalog lacks tolerance {key}")).1
        })
    }

    pub fn points(&self) -> usize {
        self.scheme.points.unwrap_or(self.info().points)
    }

    pub fn samples(&self) -> usize {
        self.scheme.samples.unwrap_or(self.info().samples)
    }

    pub fn schedule(&self) -> Vec<f64> {
        if self.t_schedule.is_empty() {
            self.info().t_schedule.to_vec()
        } else {
            self.t_schedule.clone()
        }
    }
}

/// Dotted path of the innermost key at or before byte `offset`, best effort.
fn locate(text: &str, offset: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    for line in text[..offset.min(text.len())].lines() {
        let l = line.trim();
        if l.starts_with('[') && l.ends_with(']') {
            table = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = l.split_once('=') {
            key = k.trim().to_string();
        }
    }
    match (table.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_round_trips() {
        let cfg = ScenarioConfig::from_toml("scenario = \"top_chern\"\nseed = 5\n").unwrap();
        assert_eq!(cfg.scenario, ScenarioId::TopChern);
        assert_eq!(cfg.seed, 5);
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn bad_dimension_is_reported_with_its_path() {
        let e = ScenarioConfig::from_toml("scenario = \"top_chern\"\n[dims]\nn = 9\n").unwrap_err();
        assert_eq!(e.path, "dims.n");
        let e = ScenarioConfig::from_toml("scenario = \"top_chern\"\n[dims]\nwidth = 1\n").unwrap_err();
        assert_eq!(e.path, "dims.width");
    }

    #[test]
    fn bad_schedule_and_tolerance_are_rejected() {
        let e = ScenarioConfig::from_toml("scenario = \"superconnection\"\nt_schedule = [1.0, 4.0, 2.0]\n").unwrap_err();
        assert_eq!(e.path, "t_schedule[2]");
        let e = ScenarioConfig::from_toml("scenario = \"superconnection\"\n[tolerances]\nmass = -1.0\n").unwrap_err();
        assert_eq!(e.path, "tolerances.mass");
        let e = ScenarioConfig::from_toml("scenario = \"maslov_spark\"\n[scheme]\npoints = 1\n").unwrap_err();
        assert_eq!(e.path, "scheme.points");
    }

    #[test]
    fn unknown_fields_and_scenarios_fail_to_parse() {
        let e = ScenarioConfig::from_toml("scenario = \"nope\"\n").unwrap_err();
        assert_eq!(e.path, "scenario");
        let e = ScenarioConfig::from_toml("scenario = \"top_chern\"\n[scheme]\norder = 3\n").unwrap_err();
        assert!(e.path.starts_with("scheme"), "{e}");
    }
}
