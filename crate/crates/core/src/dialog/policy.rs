use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::resolve::{ClarificationRequest, ResolvedQuery};
use super::Intent;
use crate::analytics::{
    average_delay, bottleneck_station, build_profile, delay_mitigated, first_delay_station,
    group_by_train, pct_late_over, prediction_series, train_similarity, AnalyticsConfig,
    Bottleneck, DateRange, DelayProfile, Mitigation, Similarity, StationSelector,
    StopValue,
};
use crate::domain::{DelayObservation, NetworkCatalog, StationCode, TrainSchedule};
use crate::predictor::{
    gate_response, predict_journey, CiLevel, GateConfig, GateDecision, JourneyPrediction,
    ModelKind, ModelRegistry, PredictError, PredictionRequest, RefusalReason, StopPrediction,
};

/// Everything the policy reads: timetable, trained models and history.
#[derive(Debug, Clone)]
pub struct Backend {
    pub catalog: NetworkCatalog,
    pub registry: ModelRegistry,
    history: BTreeMap<String, Vec<DelayObservation>>,
    profiles: Vec<DelayProfile>,
}

impl Backend {
    pub fn new(catalog: NetworkCatalog, registry: ModelRegistry, observations: Vec<DelayObservation>) -> Self {
        let history = group_by_train(observations);
        let profiles = catalog
            .trains
            .keys()
            .filter_map(|t| {
                let obs = history.get(t).map(Vec::as_slice).unwrap_or(&[]);
                build_profile(&catalog, obs, t, DateRange::all()).ok()
            })
            .collect();
        Backend { catalog, registry, history, profiles }
    }

    pub fn history(&self, train: &str) -> &[DelayObservation] {
        self.history.get(train).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn profile(&self, train: &str) -> Option<&DelayProfile> {
        self.profiles.iter().find(|p| p.train_number == train)
    }

    pub fn profiles(&self) -> &[DelayProfile] {
        &self.profiles
    }

    pub fn n_observations(&self) -> usize {
        self.history.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub gate: GateConfig,
    pub analytics: AnalyticsConfig,
    pub model_kind: ModelKind,
    pub ci_level: CiLevel,
    pub n_similar: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            gate: GateConfig::default(),
            analytics: AnalyticsConfig::default(),
            model_kind: ModelKind::default(),
            ci_level: CiLevel::default(),
            n_similar: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationEntry {
    pub code: StationCode,
    pub name: String,
}

/// Outcome of one turn, before rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyResult {
    Delay {
        train_number: String,
        date: NaiveDate,
        stop: StopPrediction,
        confidence: f64,
        /// Delay added between this stop and the destination, when it grows
        /// by more than the mitigation band.
        further_delay_min: Option<f64>,
    },
    FurtherDelay {
        train_number: String,
        date: NaiveDate,
        mitigation: Mitigation,
    },
    AtDestination {
        train_number: String,
        station: StationCode,
    },
    FirstDelay {
        train_number: String,
        date: NaiveDate,
        threshold_min: f64,
        first: Option<StopValue>,
    },
    AverageDelay {
        train_number: String,
        station: StationCode,
        mean_late_min: f64,
        pct_late_over: f64,
        threshold_min: f64,
        n_days: usize,
    },
    Bottleneck {
        train_number: String,
        bottleneck: Bottleneck,
    },
    SimilarTrains {
        train_number: String,
        similar: Vec<Similarity>,
    },
    StationList {
        train_number: String,
        stations: Vec<StationEntry>,
    },
    StationListOffer {
        train_number: String,
        requested: StationCode,
        requested_mention: String,
        stations: Vec<StationEntry>,
    },
    Refusal {
        train_number: String,
        reason: RefusalReason,
    },
    UnknownTrain {
        train_number: String,
    },
    NoData {
        train_number: String,
    },
    Clarification {
        request: ClarificationRequest,
    },
    Greeting,
    Help,
    Fallback,
}

impl PolicyResult {
    pub fn needs_clarification(&self) -> bool {
        matches!(self, PolicyResult::Clarification { .. } | PolicyResult::StationListOffer { .. })
    }

    /// Answers that end with the satisfaction check.
    pub fn is_answer(&self) -> bool {
        matches!(
            self,
            PolicyResult::Delay { .. }
                | PolicyResult::FurtherDelay { .. }
                | PolicyResult::FirstDelay { .. }
                | PolicyResult::AverageDelay { .. }
                | PolicyResult::Bottleneck { .. }
                | PolicyResult::SimilarTrains { .. }
                | PolicyResult::StationList { .. }
        )
    }
}

fn station_entries(catalog: &NetworkCatalog, schedule: &TrainSchedule) -> Vec<StationEntry> {
    schedule
        .stops
        .iter()
        .map(|s| StationEntry {
            code: s.station.clone(),
            name: catalog.station_name(&s.station).unwrap_or(s.station.as_str()).to_string(),
        })
        .collect()
}

enum Predicted {
    Ok(JourneyPrediction),
    Done(PolicyResult),
}

fn predict(
    backend: &Backend,
    config: &PolicyConfig,
    query: &ResolvedQuery,
    schedule: &TrainSchedule,
    station: Option<&StationCode>,
) -> Predicted {
    let request = PredictionRequest {
        station: station.cloned(),
        ci_level: config.ci_level,
        model_kind: config.model_kind,
        ..PredictionRequest::new(schedule.train_number.clone(), query.date)
    };
    match predict_journey(&backend.registry, &backend.catalog, &request) {
        Ok(p) => match gate_response(&p, &config.gate) {
            GateDecision::Answer => Predicted::Ok(p),
            GateDecision::Refuse(reason) => Predicted::Done(PolicyResult::Refusal {
                train_number: schedule.train_number.clone(),
                reason,
            }),
        },
        Err(PredictError::StationNotOnRoute { station, .. }) => {
            Predicted::Done(station_offer(backend, query, schedule, &station))
        }
        Err(_) => Predicted::Done(PolicyResult::UnknownTrain {
            train_number: schedule.train_number.clone(),
        }),
    }
}

fn station_offer(backend: &Backend, query: &ResolvedQuery, schedule: &TrainSchedule, station: &StationCode) -> PolicyResult {
    PolicyResult::StationListOffer {
        train_number: schedule.train_number.clone(),
        requested: station.clone(),
        requested_mention: query
            .station_mention
            .clone()
            .unwrap_or_else(|| backend.catalog.station_name(station).unwrap_or(station.as_str()).to_string()),
        stations: station_entries(&backend.catalog, schedule),
    }
}

/// Dispatches a resolved query to the predictor or analytics. Errors become
/// results; this never panics on user input.
pub fn execute_policy(query: &ResolvedQuery, backend: &Backend, config: &PolicyConfig) -> PolicyResult {
    let train = match (&query.train_number, query.intent) {
        (_, Intent::Greet) => return PolicyResult::Greeting,
        (_, Intent::Help) => return PolicyResult::Help,
        (_, Intent::Fallback) => return PolicyResult::Fallback,
        (None, intent) => {
            return PolicyResult::Clarification {
                request: ClarificationRequest::WhichTrain { intent },
            }
        }
        (Some(t), _) => t.clone(),
    };
    let Some(schedule) = backend.catalog.train(&train) else {
        return PolicyResult::UnknownTrain { train_number: train };
    };
    let analytics = &config.analytics;

    match query.intent {
        Intent::QueryDelay => {
            let station = query.station.clone().unwrap_or_else(|| schedule.destination().station.clone());
            let p = match predict(backend, config, query, schedule, Some(&station)) {
                Predicted::Ok(p) => p,
                Predicted::Done(r) => return r,
            };
            let stop = p.focus().clone();
            let dest = p.stops.last().expect("routes have stops").expected_late_min;
            let further = dest - stop.expected_late_min;
            PolicyResult::Delay {
                train_number: train,
                date: query.date,
                further_delay_min: (stop.stop_index + 1 < p.stops.len() && further > analytics.mitigation_band_min)
                    .then_some(further),
                stop,
                confidence: p.confidence,
            }
        }
        Intent::QueryDelayFurther => {
            let Some(station) = query.station.clone() else {
                return PolicyResult::Clarification {
                    request: ClarificationRequest::WhichStation { intent: query.intent, train_number: train },
                };
            };
            if schedule.route_position(&station).is_none() {
                return station_offer(backend, query, schedule, &station);
            }
            let p = match predict(backend, config, query, schedule, Some(&station)) {
                Predicted::Ok(p) => p,
                Predicted::Done(r) => return r,
            };
            match delay_mitigated(&prediction_series(&p), &station, analytics.mitigation_band_min) {
                Ok(mitigation) => PolicyResult::FurtherDelay { train_number: train, date: query.date, mitigation },
                Err(_) => PolicyResult::AtDestination { train_number: train, station },
            }
        }
        Intent::FirstDelay => {
            let p = match predict(backend, config, query, schedule, None) {
                Predicted::Ok(p) => p,
                Predicted::Done(r) => return r,
            };
            PolicyResult::FirstDelay {
                train_number: train,
                date: query.date,
                threshold_min: analytics.delayed_threshold_min,
                first: first_delay_station(&prediction_series(&p), analytics.delayed_threshold_min),
            }
        }
        Intent::AverageDelay => {
            let station = query.station.clone().unwrap_or_else(|| schedule.destination().station.clone());
            if schedule.route_position(&station).is_none() {
                return station_offer(backend, query, schedule, &station);
            }
            let obs = backend.history(&train);
            let sel = StationSelector::Station(station.clone());
            let all = DateRange::all();
            let mean = average_delay(&backend.catalog, obs, &train, &sel, all);
            let pct = pct_late_over(&backend.catalog, obs, &train, &sel, analytics.late_threshold_min, all);
            match (mean, pct) {
                (Ok(mean_late_min), Ok(pct_late_over)) => PolicyResult::AverageDelay {
                    n_days: obs.iter().filter(|o| o.station == station).count(),
                    train_number: train,
                    station,
                    mean_late_min,
                    pct_late_over,
                    threshold_min: analytics.late_threshold_min,
                },
                _ => PolicyResult::NoData { train_number: train },
            }
        }
        Intent::Bottleneck => match backend.profile(&train).map(|p| bottleneck_station(&p.series())) {
            Some(Ok(bottleneck)) => PolicyResult::Bottleneck { train_number: train, bottleneck },
            _ => PolicyResult::NoData { train_number: train },
        },
        Intent::SimilarTrains => {
            match train_similarity(backend.profiles(), &train, config.n_similar + 1, analytics) {
                Ok(list) => PolicyResult::SimilarTrains {
                    similar: list
                        .into_iter()
                        .filter(|s| s.train_number != train)
                        .take(config.n_similar)
                        .collect(),
                    train_number: train,
                },
                Err(_) => PolicyResult::NoData { train_number: train },
            }
        }
        Intent::ListStations => PolicyResult::StationList {
            stations: station_entries(&backend.catalog, schedule),
            train_number: train,
        },
        Intent::Greet | Intent::Help | Intent::Fallback => unreachable!("handled above"),
    }
}
