//! Scenario configuration: TOML or JSON overrides deep-merged over a preset.

use std::path::Path;

use co2risk_core::pipeline::{Preset, ScenarioConfig};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::error::{CliError, Result};

/// Grid and ensemble scale of the preset the overrides apply to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// 21x21x3 cells, 50 members.
    Desk,
    /// The preset's own grid and ensemble size.
    Full,
}

/// Base configuration for `preset` at `scale`.
pub fn preset_config(preset: Preset, scale: Scale) -> ScenarioConfig {
    let c = ScenarioConfig::preset(preset);
    match scale {
        Scale::Desk => c.desk_scaled(),
        Scale::Full => c,
    }
}

/// Parses TOML text into a JSON value, reporting line and column on error.
pub fn parse_toml(text: &str, origin: &str) -> Result<Value> {
    let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {}", one_line(&e.to_string()))))?;
    serde_json::to_value(table).map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Recursively merges `overlay` into `base`: tables merge key by key, any
/// other value replaces.
pub fn deep_merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Deserializes with the path of the offending field in the error.
pub fn from_value_with_path<T: DeserializeOwned>(value: Value, origin: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{origin}: at {path}: {}", e.inner()))
    })
}

/// Preset named by `preset`, else by the overrides' `preset` key, else
/// example1.
fn pick_preset(flag: Option<Preset>, overrides: &Value) -> Result<Preset> {
    if let Some(p) = flag {
        return Ok(p);
    }
    match overrides.get("preset") {
        Some(Value::String(s)) => s.parse().map_err(CliError::Config),
        Some(other) => Err(CliError::Config(format!("preset must be a string, got {other}"))),
        None => Ok(Preset::Example1),
    }
}

/// Resolves a configuration from parsed overrides.
pub fn resolve(overrides: Value, origin: &str, preset: Option<Preset>, scale: Scale) -> Result<ScenarioConfig> {
    let preset = pick_preset(preset, &overrides)?;
    let mut value = serde_json::to_value(preset_config(preset, scale)).map_err(|e| CliError::Config(e.to_string()))?;
    deep_merge(&mut value, overrides);
    if let Value::Object(m) = &mut value {
        m.insert("preset".into(), serde_json::to_value(preset).expect("preset serializes"));
    }
    let config: ScenarioConfig = from_value_with_path(value, origin)?;
    config.validate()?;
    Ok(config)
}

/// Parses a config file: JSON when named `*.json`, TOML otherwise.
pub fn read_overrides(path: &Path) -> Result<Value> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {origin}: {e}")))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
    } else {
        parse_toml(&text, &origin)
    }
}

/// Loads a config file over a preset, fills defaults and validates.
pub fn load_config(path: &Path, preset: Option<Preset>, scale: Scale) -> Result<ScenarioConfig> {
    resolve(read_overrides(path)?, &path.display().to_string(), preset, scale)
}
