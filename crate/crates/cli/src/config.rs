//! Run configuration: a TOML (or JSON) tree, optionally patched from the
//! environment and the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use qtransport::experiments::{preset_registry, Side, DEFAULT_STRIDE};
use qtransport::mapping::CoreConfig;

use crate::error::{CliError, CliResult};

/// Prefix of environment overrides; `__` separates nested keys, e.g.
/// `QNET_PARAMETERS__DELTA=0.5`.
pub const ENV_PREFIX: &str = "QNET_";

fn default_stride() -> usize {
    DEFAULT_STRIDE
}

fn default_propagator() -> String {
    "expm".into()
}

fn default_envelope() -> String {
    "analytic-signal".into()
}

fn default_edge_periods() -> f64 {
    1.0
}

fn empty_table() -> Value {
    Value::Object(Map::new())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Disorder strengths to sweep; defaults to the preset's `delta`.
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub include_circuit: bool,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    201
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            deltas: Vec::new(),
            include_circuit: false,
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Preset name: anderson, ssh, transfer, b800 or custom.
    pub experiment: String,
    #[serde(default)]
    pub side: Side,
    /// Disorder seed; overrides `parameters.seed` where the preset has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_propagator")]
    pub propagator: String,
    #[serde(default = "default_envelope")]
    pub envelope: String,
    #[serde(default = "default_edge_periods")]
    pub edge_periods: f64,
    /// Preset parameter overrides, checked against the preset's schema.
    #[serde(default = "empty_table")]
    pub parameters: Value,
    #[serde(default)]
    pub platform: CoreConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
}

fn is_json(path: &Path, text: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) || text.trim_start().starts_with('{')
}

/// Parses a config tree, reporting unknown keys and syntax errors with
/// their location.
pub fn parse(path: &Path, text: &str) -> CliResult<Value> {
    let tree: Value = if is_json(path, text) {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(cfg).expect("config serializes")
    } else {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(cfg).expect("config serializes")
    };
    Ok(tree)
}

/// Reads a literal override: TOML syntax when it parses (numbers, booleans,
/// arrays, quoted strings), otherwise the raw string.
fn override_value(raw: &str) -> Value {
    toml::from_str::<Map<String, Value>>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut m| m.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies `QNET_A__B=value` style overrides to `tree`.
pub fn apply_overrides<I>(tree: &mut Value, vars: I) -> CliResult<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..]
            .split("__")
            .map(str::to_ascii_lowercase)
            .collect();
        if path.iter().any(String::is_empty) {
            return Err(CliError::config(format!("malformed override variable `{key}`")));
        }
        let mut node = &mut *tree;
        for part in &path[..path.len() - 1] {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| CliError::config(format!("`{key}` descends into a non-table value")))?;
            node = obj.entry(part.clone()).or_insert_with(empty_table);
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::config(format!("`{key}` descends into a non-table value")))?;
        obj.insert(path[path.len() - 1].clone(), override_value(&raw));
        log::info!("override {} = {raw}", path.join("."));
    }
    Ok(())
}

/// Typed view of a (possibly patched) tree.
pub fn typed(tree: Value) -> CliResult<RunConfig> {
    let cfg: RunConfig = serde_json::from_value(tree).map_err(|e| CliError::config(e.to_string()))?;
    if !cfg.parameters.is_object() {
        return Err(CliError::config("`parameters` must be a table"));
    }
    Ok(cfg)
}

pub fn load(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut tree = parse(path, &text)?;
    apply_overrides(&mut tree, std::env::vars())?;
    typed(tree)
}

impl RunConfig {
    /// Pushes the top-level seed into the preset parameters and expands the
    /// parameters to the preset's full, defaulted form.
    pub fn resolve(mut self) -> CliResult<RunConfig> {
        let registry = preset_registry();
        if let Some(seed) = self.seed {
            if self.experiment == "anderson" {
                self.parameters
                    .as_object_mut()
                    .expect("checked table")
                    .insert("seed".into(), Value::from(seed));
            }
        }
        let preset = registry.create(&self.experiment, self.parameters.clone())?;
        self.parameters = preset.parameters();
        if self.seed.is_none() {
            self.seed = Some(self.parameters.get("seed").and_then(Value::as_u64).unwrap_or(0));
        }
        if self.stride == 0 {
            return Err(CliError::config("`stride` must be at least 1"));
        }
        Ok(self)
    }

    /// Resolved config as written to `provenance.json`; output location is
    /// left to the caller of a re-run.
    pub fn provenance(&self) -> Value {
        let mut copy = self.clone();
        copy.out = None;
        serde_json::to_value(copy).expect("config serializes")
    }
}
