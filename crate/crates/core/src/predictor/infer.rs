use std::collections::BTreeSet;
use std::time::Instant;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::build_features;
use super::registry::{index_journeys, ModelRegistry, StationModelBundle};
use super::{CiLevel, ModelKind, PredictError, PredictionSource, ResidualQuantiles};
use crate::domain::{
    DelayObservation, JourneyKey, NetworkCatalog, StationCode, TrainSchedule, EARLY_ARRIVAL_FLOOR,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRequest {
    pub train_number: String,
    pub date: NaiveDate,
    #[serde(default)]
    pub station: Option<StationCode>,
    #[serde(default)]
    pub ci_level: CiLevel,
    #[serde(default)]
    pub model_kind: ModelKind,
}

impl PredictionRequest {
    pub fn new(train_number: impl Into<String>, date: NaiveDate) -> Self {
        PredictionRequest {
            train_number: train_number.into(),
            date,
            station: None,
            ci_level: CiLevel::default(),
            model_kind: ModelKind::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopPrediction {
    pub station: StationCode,
    pub stop_index: usize,
    pub expected_late_min: f64,
    pub interval_low: f64,
    pub interval_high: f64,
    pub source: PredictionSource,
    /// Training rows behind this estimate (blended for interpolated stops).
    pub n_train_samples: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JourneyPrediction {
    pub train_number: String,
    pub date: NaiveDate,
    pub ci_level: CiLevel,
    pub model_kind: ModelKind,
    pub stops: Vec<StopPrediction>,
    /// Position of the requested station, if one was given.
    pub requested_stop: Option<usize>,
    pub confidence: f64,
    pub elapsed_prediction_ms: f64,
}

impl JourneyPrediction {
    /// The requested stop, or the destination when none was requested.
    pub fn focus(&self) -> &StopPrediction {
        let i = self.requested_stop.unwrap_or(self.stops.len() - 1);
        &self.stops[i]
    }
}

/// How one stop of a route is served.
#[derive(Debug, Clone, Copy)]
pub enum BundleChoice<'a> {
    Direct(&'a StationModelBundle),
    Shared(&'a StationModelBundle),
    /// Blend of the served stops at route positions `before` and `after`;
    /// `t` is the distance fraction from `before` toward `after`. When only
    /// one neighbour exists its value is carried over unchanged.
    Interpolated {
        before: Option<usize>,
        after: Option<usize>,
        t: f64,
    },
    Fallback,
}

impl<'a> BundleChoice<'a> {
    fn bundle(&self) -> Option<&'a StationModelBundle> {
        match *self {
            BundleChoice::Direct(b) | BundleChoice::Shared(b) => Some(b),
            _ => None,
        }
    }

    pub fn source(&self) -> PredictionSource {
        match self {
            BundleChoice::Direct(_) => PredictionSource::Direct,
            BundleChoice::Shared(_) => PredictionSource::Shared,
            BundleChoice::Interpolated { .. } => PredictionSource::Interpolated,
            BundleChoice::Fallback => PredictionSource::Fallback,
        }
    }
}

/// Resolves gaps between served stops. `served[i]` is the bundle serving stop
/// `i`, if any.
fn fill_gaps<'a>(
    schedule: &TrainSchedule,
    served: Vec<Option<BundleChoice<'a>>>,
) -> Vec<BundleChoice<'a>> {
    let positions: Vec<usize> = (0..served.len()).filter(|&i| served[i].is_some()).collect();
    served
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            Some(choice) => *choice,
            None if positions.is_empty() => BundleChoice::Fallback,
            None => {
                let after_pos = positions.partition_point(|&p| p < i);
                let before = after_pos.checked_sub(1).map(|k| positions[k]);
                let after = positions.get(after_pos).copied();
                let t = match (before, after) {
                    (Some(b), Some(a)) => {
                        let db = schedule.stops[b].distance_km;
                        let da = schedule.stops[a].distance_km;
                        (schedule.stops[i].distance_km - db) / (da - db)
                    }
                    _ => 0.0,
                };
                BundleChoice::Interpolated { before, after, t }
            }
        })
        .collect()
}

/// Serving plan for a train without its own models: shared bundles where
/// the station has one, interpolation elsewhere.
pub(crate) fn shared_plan<'a>(
    registry: &'a ModelRegistry,
    schedule: &TrainSchedule,
) -> Vec<BundleChoice<'a>> {
    let served = schedule
        .stops
        .iter()
        .map(|s| registry.shared.get(&s.station).map(BundleChoice::Shared))
        .collect();
    fill_gaps(schedule, served)
}

/// Serving plan for any train: its own bundles if the registry has them,
/// falling back to shared bundles stop by stop.
pub(crate) fn route_plan<'a>(
    registry: &'a ModelRegistry,
    schedule: &TrainSchedule,
) -> Vec<BundleChoice<'a>> {
    let Some(own) = registry.direct.get(&schedule.train_number) else {
        return shared_plan(registry, schedule);
    };
    let served = schedule
        .stops
        .iter()
        .map(|s| {
            own.get(&s.station)
                .map(BundleChoice::Direct)
                .or_else(|| registry.shared.get(&s.station).map(BundleChoice::Shared))
        })
        .collect();
    fill_gaps(schedule, served)
}

/// How a stop of an unknown train is served: its station's shared bundle, an
/// interpolation between the nearest shared stations on the route, or the
/// fallback when the route has no shared station at all.
pub fn generalize_unknown<'a>(
    registry: &'a ModelRegistry,
    schedule: &TrainSchedule,
    stop_index: usize,
) -> BundleChoice<'a> {
    shared_plan(registry, schedule)[stop_index]
}

/// Point estimates along the route. Served stops are chained in route order,
/// each fed the previous served stop's estimate; gaps are filled afterwards.
pub(crate) fn chain_expected(
    schedule: &TrainSchedule,
    plan: &[BundleChoice<'_>],
    date: NaiveDate,
    kind: ModelKind,
) -> Vec<f64> {
    let mut values = vec![0.0; plan.len()];
    let mut prev = 0.0;
    for (i, choice) in plan.iter().enumerate() {
        if let Some(bundle) = choice.bundle() {
            let x = build_features(schedule, i, date, prev);
            let v = bundle.predict(kind, &x).max(EARLY_ARRIVAL_FLOOR);
            values[i] = v;
            prev = v;
        }
    }
    for (i, choice) in plan.iter().enumerate() {
        if let BundleChoice::Interpolated { before, after, t } = *choice {
            values[i] = match (before, after) {
                (Some(b), Some(a)) => values[b] + (values[a] - values[b]) * t,
                (Some(n), None) | (None, Some(n)) => values[n],
                (None, None) => 0.0,
            };
        }
    }
    values
}

fn quantiles_for(
    registry: &ModelRegistry,
    plan: &[BundleChoice<'_>],
    i: usize,
    kind: ModelKind,
) -> (ResidualQuantiles, f64) {
    let served = |j: usize| {
        let b = plan[j].bundle().expect("interpolation anchors are served stops");
        (b.residual_quantiles.get(kind), b.n_train_samples as f64)
    };
    match plan[i] {
        BundleChoice::Direct(b) | BundleChoice::Shared(b) => {
            (b.residual_quantiles.get(kind), b.n_train_samples as f64)
        }
        BundleChoice::Interpolated { before, after, t } => match (before, after) {
            (Some(b), Some(a)) => {
                let (qb, nb) = served(b);
                let (qa, na) = served(a);
                (qb.lerp(qa, t), nb + (na - nb) * t)
            }
            (Some(n), None) | (None, Some(n)) => served(n),
            (None, None) => (registry.metadata.widest_quantiles.get(kind), 1.0),
        },
        BundleChoice::Fallback => (registry.metadata.widest_quantiles.get(kind), 1.0),
    }
}

/// Predicts every stop of one journey.
pub fn predict_journey(
    registry: &ModelRegistry,
    catalog: &NetworkCatalog,
    request: &PredictionRequest,
) -> Result<JourneyPrediction, PredictError> {
    let started = Instant::now();
    let schedule = catalog
        .train(&request.train_number)
        .ok_or_else(|| PredictError::UnknownTrain(request.train_number.clone()))?;
    let requested_stop = match &request.station {
        None => None,
        Some(station) => Some(schedule.route_position(station).ok_or_else(|| {
            PredictError::StationNotOnRoute {
                train: schedule.train_number.clone(),
                station: station.clone(),
                route: schedule.station_codes(),
            }
        })?),
    };

    let plan = route_plan(registry, schedule);
    let expected = chain_expected(schedule, &plan, request.date, request.model_kind);
    let mut stops = Vec::with_capacity(plan.len());
    let (mut weighted, mut total) = (0.0, 0.0);
    for (i, choice) in plan.iter().enumerate() {
        let (q, n) = quantiles_for(registry, &plan, i, request.model_kind);
        let hw = q.half_width(request.ci_level);
        let source = choice.source();
        weighted += n * source.confidence_weight();
        total += n;
        stops.push(StopPrediction {
            station: schedule.stops[i].station.clone(),
            stop_index: i,
            expected_late_min: expected[i],
            interval_low: (expected[i] - hw).max(EARLY_ARRIVAL_FLOOR),
            interval_high: expected[i] + hw,
            source,
            n_train_samples: n,
        });
    }
    let confidence = if total > 0.0 { weighted / total } else { 0.0 };
    Ok(JourneyPrediction {
        train_number: schedule.train_number.clone(),
        date: request.date,
        ci_level: request.ci_level,
        model_kind: request.model_kind,
        stops,
        requested_stop,
        confidence,
        elapsed_prediction_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub ci_level: CiLevel,
    pub model_kind: ModelKind,
    /// Fraction of observed delays inside their predicted interval (inclusive).
    pub coverage: f64,
    pub n_predictions: usize,
    pub n_journeys: usize,
    pub rmse: f64,
    pub mae: f64,
}

/// Interval coverage and point error over the given journeys. Every observed
/// stop of every journey counts once.
pub fn evaluate_ci_accuracy(
    registry: &ModelRegistry,
    catalog: &NetworkCatalog,
    observations: &[DelayObservation],
    keys: &BTreeSet<JourneyKey>,
    ci_level: CiLevel,
    model_kind: ModelKind,
) -> Result<CoverageReport, PredictError> {
    let relevant: Vec<DelayObservation> = observations
        .iter()
        .filter(|o| keys.contains(&o.journey()))
        .cloned()
        .collect();
    let journeys = index_journeys(catalog, &relevant);
    let per_journey: Vec<(usize, usize, f64, f64)> = journeys
        .par_iter()
        .map(|(key, actual)| {
            let request = PredictionRequest {
                ci_level,
                model_kind,
                ..PredictionRequest::new(key.train_number.clone(), key.date)
            };
            let p = predict_journey(registry, catalog, &request)?;
            let (mut hits, mut n, mut sq, mut abs) = (0, 0, 0.0, 0.0);
            for (stop, y) in p.stops.iter().zip(actual) {
                let Some(y) = *y else { continue };
                n += 1;
                if stop.interval_low <= y && y <= stop.interval_high {
                    hits += 1;
                }
                let e = y - stop.expected_late_min;
                sq += e * e;
                abs += e.abs();
            }
            Ok((hits, n, sq, abs))
        })
        .collect::<Result<_, PredictError>>()?;
    let (hits, n, sq, abs) = per_journey
        .iter()
        .fold((0, 0, 0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2, acc.3 + x.3));
    if n == 0 {
        return Err(PredictError::EmptyEvaluationSet);
    }
    Ok(CoverageReport {
        ci_level,
        model_kind,
        coverage: hits as f64 / n as f64,
        n_predictions: n,
        n_journeys: journeys.len(),
        rmse: (sq / n as f64).sqrt(),
        mae: abs / n as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub min_confidence: f64,
    pub timeout_ms: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            min_confidence: 0.5,
            timeout_ms: 10_000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum RefusalReason {
    LowConfidence { confidence: f64, min_confidence: f64 },
    Timeout { elapsed_ms: f64, timeout_ms: f64 },
}

impl RefusalReason {
    pub fn code(&self) -> &'static str {
        match self {
            RefusalReason::LowConfidence { .. } => "low-confidence",
            RefusalReason::Timeout { .. } => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateDecision {
    Answer,
    Refuse(RefusalReason),
}

/// Decides whether a prediction is fit to present. Confidence is checked
/// before timeliness.
pub fn gate_response(prediction: &JourneyPrediction, config: &GateConfig) -> GateDecision {
    if prediction.confidence < config.min_confidence {
        return GateDecision::Refuse(RefusalReason::LowConfidence {
            confidence: prediction.confidence,
            min_confidence: config.min_confidence,
        });
    }
    if prediction.elapsed_prediction_ms > config.timeout_ms {
        return GateDecision::Refuse(RefusalReason::Timeout {
            elapsed_ms: prediction.elapsed_prediction_ms,
            timeout_ms: config.timeout_ms,
        });
    }
    GateDecision::Answer
}
