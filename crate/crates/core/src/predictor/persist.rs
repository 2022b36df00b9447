use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use super::features::FeatureSchema;
use super::registry::ModelRegistry;
use super::PredictError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    format_version: u32,
    checksum: String,
    payload: &'a RawValue,
}

#[derive(Deserialize)]
struct EnvelopeIn<'a> {
    format_version: serde_json::Value,
    checksum: String,
    #[serde(borrow)]
    payload: &'a RawValue,
}

fn checksum(payload: &str) -> String {
    hex::encode(Sha256::digest(payload.as_bytes()))
}

/// Serialises a registry as a self-checking JSON document. See
/// `docs/bundle-format.md` for the layout.
pub fn write_registry(registry: &ModelRegistry) -> Result<String, PredictError> {
    let payload = serde_json::to_string(registry)
        .map_err(|e| PredictError::CorruptBundle(e.to_string()))?;
    let raw = RawValue::from_string(payload)
        .map_err(|e| PredictError::CorruptBundle(e.to_string()))?;
    let envelope = EnvelopeOut {
        format_version: FORMAT_VERSION,
        checksum: checksum(raw.get()),
        payload: &raw,
    };
    serde_json::to_string(&envelope).map_err(|e| PredictError::CorruptBundle(e.to_string()))
}

pub fn read_registry(text: &str) -> Result<ModelRegistry, PredictError> {
    let envelope: EnvelopeIn<'_> =
        serde_json::from_str(text).map_err(|e| PredictError::CorruptBundle(e.to_string()))?;
    let version = match &envelope.format_version {
        serde_json::Value::Number(n) => n.as_u64(),
        serde_json::Value::String(s) => s.parse().ok(),
        _ => None,
    };
    if version != Some(FORMAT_VERSION as u64) {
        return Err(PredictError::UnsupportedVersion(envelope.format_version.to_string()));
    }
    let payload = envelope.payload.get();
    if checksum(payload) != envelope.checksum {
        return Err(PredictError::CorruptBundle("checksum mismatch".into()));
    }
    let registry: ModelRegistry =
        serde_json::from_str(payload).map_err(|e| PredictError::CorruptBundle(e.to_string()))?;
    if registry.schema != FeatureSchema::default() {
        return Err(PredictError::CorruptBundle(format!(
            "feature schema {:?} does not match this build",
            registry.schema.names
        )));
    }
    Ok(registry)
}

pub fn save_registry(registry: &ModelRegistry, path: impl AsRef<Path>) -> Result<(), PredictError> {
    fs::write(path, write_registry(registry)?)?;
    Ok(())
}

pub fn load_registry(path: impl AsRef<Path>) -> Result<ModelRegistry, PredictError> {
    read_registry(&fs::read_to_string(path)?)
}
