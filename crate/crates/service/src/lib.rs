//! HTTP service and command-line front end for the train delay assistant.

pub mod api;
pub mod cli;
pub mod config;
pub mod sessions;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use trainbot_core::dialog::{Assistant, AssistantConfig, PolicyConfig};
use trainbot_core::domain::{read_delays, read_schedules, CsvError, DelayObservation, NetworkCatalog};
use trainbot_core::predictor::{load_registry, train_registry, GateConfig, PredictError, TrainingOptions};
use trainbot_core::synthdata::{generate_scenario, split_dataset, Scenario, SynthError};

use crate::config::{AppConfig, ConfigError};

/// Split ratios used by `train`, `eval` and the demo world.
pub const SPLIT_RATIOS: [f64; 3] = [0.6, 0.2, 0.2];

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: CsvError },
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

fn open(path: &Path) -> Result<BufReader<File>, ServiceError> {
    File::open(path).map(BufReader::new).map_err(|source| ServiceError::Open {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_catalog(path: &Path) -> Result<NetworkCatalog, ServiceError> {
    read_schedules(open(path)?).map_err(|source| ServiceError::Csv {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_observations(path: &Path) -> Result<Vec<DelayObservation>, ServiceError> {
    read_delays(open(path)?).map_err(|source| ServiceError::Csv {
        path: path.display().to_string(),
        source,
    })
}

pub fn policy_config(config: &AppConfig) -> PolicyConfig {
    PolicyConfig {
        gate: GateConfig {
            min_confidence: config.gate_min_confidence,
            timeout_ms: config.gate_timeout_ms,
        },
        model_kind: config.model_kind,
        ci_level: config.ci_default_level,
        ..PolicyConfig::default()
    }
}

fn assistant_config(config: &AppConfig) -> AssistantConfig {
    AssistantConfig {
        policy: policy_config(config),
        ..AssistantConfig::default()
    }
}

/// Loads the schedules, delay history and trained bundle named in `config`.
pub fn assistant_from_config(config: &AppConfig) -> Result<Assistant, ServiceError> {
    let catalog = load_catalog(&config.data_schedules)?;
    let observations = load_observations(&config.data_delays)?;
    let registry = load_registry(&config.model_bundle_path)?;
    Ok(Assistant::new(catalog, registry, observations, assistant_config(config)))
}

/// Generates the demo network, trains on it and wraps it in an assistant.
pub fn demo_assistant(config: &AppConfig, seed: u64) -> Result<Assistant, ServiceError> {
    let data = generate_scenario(Scenario::Demo, seed)?;
    let split = split_dataset(&data.observations, SPLIT_RATIOS, seed)?;
    let mut options = TrainingOptions::default();
    options.forest.n_trees = config.model_n_trees;
    options.forest.seed = seed;
    let registry = train_registry(&data.catalog, &data.observations, &split, &options)?;
    Ok(Assistant::new(data.catalog, registry, data.observations, assistant_config(config)))
}
