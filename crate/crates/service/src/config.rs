//! Flat `key=value` configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use trainbot_core::predictor::{CiLevel, ModelKind};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub server_host: String,
    pub server_port: u16,
    pub model_bundle_path: PathBuf,
    pub model_kind: ModelKind,
    pub model_n_trees: usize,
    pub ci_default_level: CiLevel,
    pub gate_min_confidence: f64,
    pub gate_timeout_ms: f64,
    pub data_schedules: PathBuf,
    pub data_delays: PathBuf,
    pub session_ttl: Duration,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            server_host: "127.0.0.1".into(),
            server_port: 8080,
            model_bundle_path: "model.bundle".into(),
            model_kind: ModelKind::Forest,
            model_n_trees: 50,
            ci_default_level: CiLevel::L99,
            gate_min_confidence: 0.5,
            gate_timeout_ms: 10_000.0,
            data_schedules: "data/schedules.csv".into(),
            data_delays: "data/delays.csv".into(),
            session_ttl: Duration::from_secs(30 * 60),
        }
    }
}

impl AppConfig {
    pub const KEYS: [&'static str; 11] = [
        "server.host",
        "server.port",
        "model.bundle_path",
        "model.kind",
        "model.n_trees",
        "ci.default_level",
        "gate.min_confidence",
        "gate.timeout_ms",
        "data.schedules",
        "data.delays",
        "session.ttl_s",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::BadValue {
                key: key.into(),
                value: value.into(),
                reason: e.to_string(),
            })
        }
        match key {
            "server.host" => self.server_host = value.to_string(),
            "server.port" => self.server_port = parse(key, value)?,
            "model.bundle_path" => self.model_bundle_path = value.into(),
            "model.kind" => self.model_kind = parse(key, value)?,
            "model.n_trees" => self.model_n_trees = parse(key, value)?,
            "ci.default_level" => {
                let p: u32 = parse(key, value)?;
                self.ci_default_level = CiLevel::try_from(p).map_err(|e| ConfigError::BadValue {
                    key: key.into(),
                    value: value.into(),
                    reason: e.to_string(),
                })?;
            }
            "gate.min_confidence" => self.gate_min_confidence = parse(key, value)?,
            "gate.timeout_ms" => self.gate_timeout_ms = parse(key, value)?,
            "data.schedules" => self.data_schedules = value.into(),
            "data.delays" => self.data_delays = value.into(),
            "session.ttl_s" => self.session_ttl = Duration::from_secs(parse(key, value)?),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies `key=value` lines; `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = AppConfig::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "server.host" => self.server_host.clone(),
            "server.port" => self.server_port.to_string(),
            "model.bundle_path" => self.model_bundle_path.display().to_string(),
            "model.kind" => self.model_kind.to_string(),
            "model.n_trees" => self.model_n_trees.to_string(),
            "ci.default_level" => self.ci_default_level.to_string(),
            "gate.min_confidence" => self.gate_min_confidence.to_string(),
            "gate.timeout_ms" => self.gate_timeout_ms.to_string(),
            "data.schedules" => self.data_schedules.display().to_string(),
            "data.delays" => self.data_delays.display().to_string(),
            "session.ttl_s" => self.session_ttl.as_secs().to_string(),
            _ => return None,
        })
    }

    /// The config as a file that [`AppConfig::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        AppConfig::KEYS
            .iter()
            .map(|k| format!("{k}={}\n", self.get(k).expect("listed key")))
            .collect()
    }
}
