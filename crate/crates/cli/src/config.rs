use std::path::{Path, PathBuf};

use amg_core::cycle::SolveOptions;
use amg_core::problems::ProblemSpec;
use amg_core::SetupOptions;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub format: Format,
    /// Written to stdout when absent.
    pub path: Option<PathBuf>,
}

/// Axes of a sweep; an empty axis keeps the base configuration's value.
/// Points run in the order sizes, angles, prefilters, postfilters (the last
/// axis varies fastest).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    /// Angles in radians.
    pub psi: Vec<f64>,
    /// `null` means no prefilter.
    pub prefilter: Vec<Option<f64>>,
    pub postfilter: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub setup: SetupOptions,
    pub solve: SolveOptions,
    pub output: OutputConfig,
    /// Seeds the random right-hand side.
    pub seed: u64,
    /// Matrix Market file replacing the generated problem matrix.
    pub matrix: Option<PathBuf>,
    pub sweep: SweepConfig,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<amg_core::AmgError> for ConfigError {
    fn from(e: amg_core::AmgError) -> Self {
        ConfigError(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ConfigError>;

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", p.display())))
            }
        }
    }

    /// Applies `key.path = value` overrides in order. Values are parsed as
    /// JSON and fall back to plain strings.
    pub fn with_overrides(self, overrides: &[(String, String)]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut doc = serde_json::to_value(&self).map_err(|e| ConfigError(e.to_string()))?;
        for (key, raw) in overrides {
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            set_path(&mut doc, key, value)?;
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| ConfigError(format!("after overrides: {e}")))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.solve.tol.is_nan() || self.solve.tol <= 0.0 {
            return Err(ConfigError(format!("solve.tol must be positive, got {}", self.solve.tol)));
        }
        self.problem.validate()?;
        self.setup.validate()?;
        self.solve.validate()?;
        Ok(())
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = doc;
    // tables that were null accept any key; deserialization checks them
    let mut fresh = false;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(ConfigError(format!("config key {key}: {} is not a table", parts[..i].join("."))));
        };
        if i + 1 == parts.len() {
            if !fresh && !map.contains_key(*part) {
                return Err(ConfigError(format!("unknown config key {key}")));
            }
            map.insert(part.to_string(), value);
            return Ok(());
        }
        if fresh {
            node = map.entry(part.to_string()).or_insert(Value::Null);
        } else {
            node = map
                .get_mut(*part)
                .ok_or_else(|| ConfigError(format!("unknown config key {key}")))?;
        }
        if node.is_null() {
            *node = Value::Object(Default::default());
            fresh = true;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use amg_core::problems::ProblemKind;

    #[test]
    fn overrides_reach_nested_keys() {
        let cfg = ExperimentConfig::default()
            .with_overrides(&[
                ("problem.kind".into(), "aniso3d".into()),
                ("problem.n".into(), "12".into()),
                ("setup.interp.prefilter".into(), r#"{"theta": 0.2}"#.into()),
                ("setup.interp.postfilter.theta".into(), "0.1".into()),
                ("solve.tol".into(), "1e-6".into()),
            ])
            .unwrap();
        assert_eq!(cfg.problem.kind, ProblemKind::Aniso3d);
        assert_eq!(cfg.problem.n, 12);
        assert_eq!(cfg.setup.interp.prefilter.unwrap().theta, Some(0.2));
        assert_eq!(cfg.setup.interp.postfilter.unwrap().theta, Some(0.1));
        assert_eq!(cfg.solve.tol, 1e-6);
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        let base = ExperimentConfig::default;
        assert!(base().with_overrides(&[("problem.size".into(), "3".into())]).is_err());
        assert!(base().with_overrides(&[("problem.n.x".into(), "3".into())]).is_err());
        assert!(base().with_overrides(&[("problem.kind".into(), "torus".into())]).is_err());
        let cfg = base().with_overrides(&[("solve.tol".into(), "-1".into())]).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trips() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
