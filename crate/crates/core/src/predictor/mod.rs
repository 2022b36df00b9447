//! Per-station delay models, chained journey prediction, interval
//! calibration and generalisation to trains without their own history.
//!
//! Known trains get one forest and one ridge model per stop, trained with the
//! observed previous-stop delay as an input (teacher forcing). At inference
//! the previous stop's *predicted* delay is fed forward instead, so a journey
//! can be predicted weeks ahead from the timetable and calendar alone.
//! Trains without enough history are served by per-station models pooled
//! over all known trains, with distance-weighted interpolation for stations
//! no known train serves.

mod calibrate;
mod features;
mod infer;
mod persist;
mod registry;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::StationCode;
use crate::mlcore::MlError;

pub use calibrate::{calibrate_intervals, nearest_rank_percentile, ResidualQuantiles};
pub use features::{build_features, FeatureSchema, FEATURE_NAMES};
pub use infer::{
    evaluate_ci_accuracy, gate_response, generalize_unknown, predict_journey, BundleChoice,
    CoverageReport, GateConfig, GateDecision, JourneyPrediction, PredictionRequest,
    RefusalReason, StopPrediction,
};
pub use persist::{load_registry, read_registry, save_registry, write_registry, FORMAT_VERSION};
pub use registry::{
    index_journeys, train_registry, BundleScope, CalibrationSource, IntervalPair, ModelRegistry,
    StationModelBundle, TrainingMetadata, TrainingOptions,
};

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("unknown train {0}")]
    UnknownTrain(String),
    #[error("train {train} does not stop at {station}")]
    StationNotOnRoute {
        train: String,
        station: StationCode,
        route: Vec<StationCode>,
    },
    #[error("training split contains no usable journeys")]
    EmptyTrainingSplit,
    #[error("no observed stops to evaluate")]
    EmptyEvaluationSet,
    #[error("unsupported confidence level {0} (expected 68, 95 or 99)")]
    BadCiLevel(u32),
    #[error("model fit failed for {context}: {source}")]
    Fit { context: String, source: MlError },
    #[error("corrupt model bundle: {0}")]
    CorruptBundle(String),
    #[error("unsupported bundle format version {0} (this build reads version 1)")]
    UnsupportedVersion(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PredictError {
    /// Stable machine-readable code, used in service error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            PredictError::UnknownTrain(_) => "unknown-train",
            PredictError::StationNotOnRoute { .. } => "station-not-on-route",
            PredictError::EmptyTrainingSplit => "empty-training-split",
            PredictError::EmptyEvaluationSet => "empty-evaluation-set",
            PredictError::BadCiLevel(_) => "bad-ci-level",
            PredictError::Fit { .. } => "fit-failed",
            PredictError::CorruptBundle(_) => "corrupt-bundle",
            PredictError::UnsupportedVersion(_) => "unsupported-version",
            PredictError::Io(_) => "io",
        }
    }
}

/// Confidence level of a symmetric prediction interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum CiLevel {
    L68,
    L95,
    L99,
}

impl CiLevel {
    pub const ALL: [CiLevel; 3] = [CiLevel::L68, CiLevel::L95, CiLevel::L99];

    pub fn percent(self) -> u32 {
        match self {
            CiLevel::L68 => 68,
            CiLevel::L95 => 95,
            CiLevel::L99 => 99,
        }
    }
}

impl Default for CiLevel {
    fn default() -> Self {
        CiLevel::L99
    }
}

impl TryFrom<u32> for CiLevel {
    type Error = PredictError;

    fn try_from(p: u32) -> Result<Self, Self::Error> {
        match p {
            68 => Ok(CiLevel::L68),
            95 => Ok(CiLevel::L95),
            99 => Ok(CiLevel::L99),
            other => Err(PredictError::BadCiLevel(other)),
        }
    }
}

impl From<CiLevel> for u32 {
    fn from(l: CiLevel) -> u32 {
        l.percent()
    }
}

impl fmt::Display for CiLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.percent())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Forest,
    Ridge,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Forest => "forest",
            ModelKind::Ridge => "ridge",
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "forest" | "rfr" => Ok(ModelKind::Forest),
            "ridge" | "rr" => Ok(ModelKind::Ridge),
            other => Err(format!("unknown model kind {other:?} (expected forest or ridge)")),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which model produced a stop's estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionSource {
    /// The train's own per-station bundle.
    Direct,
    /// A station bundle pooled over known trains.
    Shared,
    /// Distance-weighted blend of the nearest shared stations on the route.
    Interpolated,
    /// No model covers any stop on the route.
    Fallback,
}

impl PredictionSource {
    /// Contribution of one stop to a journey's confidence score.
    pub fn confidence_weight(self) -> f64 {
        match self {
            PredictionSource::Direct | PredictionSource::Shared => 1.0,
            PredictionSource::Interpolated => 0.5,
            PredictionSource::Fallback => 0.0,
        }
    }
}
