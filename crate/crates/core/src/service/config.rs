//! Service configuration: one TOML file, overridable from `TRIAGE_*` variables.
//!
//! A dotted key such as `priority.w_s` maps to `TRIAGE_PRIORITY__W_S`.
//! Variable values are parsed as TOML scalars or arrays, falling back to a
//! plain string.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{ChatCompletionConfig, IntentConfig, ReconstructionParams};
use crate::netsim::ChannelConfig;
use crate::prioritizer::PriorityWeights;
use crate::transcription::live::LiveSttConfig;
use crate::triage::{LexiconEmotion, TriageConfig};

pub const ENV_PREFIX: &str = "TRIAGE_";
/// Credentials share the prefix but are never config keys.
pub const RESERVED_ENV: [&str; 2] = [crate::transcription::live::API_KEY_ENV, crate::knowledge::generator::API_KEY_ENV];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("config: {0}")]
    Parse(String),
    #[error("environment override {var}: {reason}")]
    Env { var: String, reason: String },
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Backends {
    pub stt: BackendKind,
    pub generator: BackendKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub scenarios: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self { corpus: "fixtures/corpus.csv".into(), scenarios: "fixtures/scenarios".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Listen {
    pub api: String,
    pub media: String,
    /// Address phone carriers should stream to, echoed in the TwiML reply.
    pub public_media_url: String,
}

impl Default for Listen {
    fn default() -> Self {
        Self {
            api: "127.0.0.1:8080".into(),
            media: "127.0.0.1:8081".into(),
            public_media_url: "wss://localhost:8081/media".into(),
        }
    }
}

/// The parameters `PUT /config` may replace at runtime.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    pub triage: TriageConfig,
    pub priority: PriorityWeights,
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.triage.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.priority.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub channel: ChannelConfig,
    pub triage: TriageConfig,
    pub priority: PriorityWeights,
    pub intent: IntentConfig,
    pub emotion: LexiconEmotion,
    pub reconstruction: ReconstructionParams,
    pub backends: Backends,
    pub stt: LiveSttConfig,
    pub generator: ChatCompletionConfig,
    pub paths: Paths,
    pub listen: Listen,
}

fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Apply `TRIAGE_*` overrides onto a parsed table.
pub fn apply_env_overrides<I, K, V>(table: &mut toml::Table, vars: I) -> Result<(), ConfigError>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    for (var, value) in vars {
        let var = var.as_ref();
        let Some(rest) = var.strip_prefix(ENV_PREFIX) else { continue };
        if RESERVED_ENV.contains(&var) || rest.is_empty() {
            continue;
        }
        let path: Vec<String> = rest.to_ascii_lowercase().split("__").map(str::to_string).collect();
        if path.iter().any(String::is_empty) {
            return Err(ConfigError::Env { var: var.into(), reason: "empty key segment".into() });
        }
        let mut cursor = &mut *table;
        for seg in &path[..path.len() - 1] {
            let entry = cursor.entry(seg.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cursor = entry
                .as_table_mut()
                .ok_or_else(|| ConfigError::Env { var: var.into(), reason: format!("`{seg}` is not a table") })?;
        }
        cursor.insert(path[path.len() - 1].clone(), env_value(value.as_ref()));
    }
    Ok(())
}

impl ServiceConfig {
    /// Parse TOML text, apply overrides and validate. Relative paths are
    /// resolved against `base_dir`.
    pub fn from_toml_str<I, K, V>(text: &str, env: I, base_dir: &Path) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        apply_env_overrides(&mut table, env)?;
        let mut cfg: ServiceConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load `path` (or defaults when `None`) with the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load_with(path, std::iter::empty::<(String, String)>())
    }

    /// Like [`ServiceConfig::load`], with `extra` variables applied after the
    /// process environment.
    pub fn load_with<I, K, V>(path: Option<&Path>, extra: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let (text, base) = match path {
            Some(p) => (
                std::fs::read_to_string(p).map_err(|e| ConfigError::Read { path: p.into(), reason: e.to_string() })?,
                p.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => (String::new(), PathBuf::from(".")),
        };
        let env: Vec<(String, String)> = std::env::vars()
            .chain(extra.into_iter().map(|(k, v)| (k.as_ref().to_string(), v.as_ref().to_string())))
            .collect();
        Self::from_toml_str(&text, env, &base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.paths.corpus, &mut self.paths.scenarios] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn runtime(&self) -> RuntimeConfig {
        RuntimeConfig { triage: self.triage.clone(), priority: self.priority }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.channel.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.runtime().validate()?;
        if self.intent.labels.is_empty() {
            return Err(ConfigError::Invalid("intent.labels must not be empty".into()));
        }
        if !self.paths.corpus.is_file() {
            return Err(ConfigError::Invalid(format!("corpus file {} does not exist", self.paths.corpus.display())));
        }
        if !self.paths.scenarios.is_dir() {
            return Err(ConfigError::Invalid(format!("scenario directory {} does not exist", self.paths.scenarios.display())));
        }
        Ok(())
    }
}
