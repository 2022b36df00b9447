//! Stations, schedules, delay observations and journey splits.
//!
//! Times on a route are measured in minutes since the train left its origin,
//! with `day_offset` recording which calendar day of the journey a stop falls
//! on. Nothing here knows about wall clocks or time zones.

mod csvio;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use csvio::{
    read_delays, read_schedules, write_delays, write_schedules, CsvError, DELAYS_HEADER,
    SCHEDULES_HEADER,
};
pub use validate::{validate_catalog, ValidationReport, Violation};

/// Lower bound applied to reported late minutes. Early arrivals beyond this are
/// clamped when an observation is constructed.
pub const EARLY_ARRIVAL_FLOOR: f64 = -30.0;

/// Maximum length of a station code.
pub const MAX_STATION_CODE_LEN: usize = 8;

/// Short uppercase station identifier such as `JU` or `ALD`.
///
/// Station identity is by code; display names live in [`NetworkCatalog::stations`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationCode(String);

impl StationCode {
    pub fn new(code: impl Into<String>) -> Self {
        StationCode(code.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Non-empty, at most eight characters, uppercase ASCII letters or digits.
    pub fn is_well_formed(&self) -> bool {
        !self.0.is_empty()
            && self.0.len() <= MAX_STATION_CODE_LEN
            && self
                .0
                .chars()
                .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
    }
}

impl fmt::Display for StationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for StationCode {
    fn from(s: &str) -> Self {
        StationCode(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStop {
    pub station: StationCode,
    pub stop_index: usize,
    /// Calendar day of the journey this stop falls on (0 = departure day).
    pub day_offset: u32,
    /// Minutes since departure from the origin.
    pub sched_arrival_min: i64,
    pub sched_departure_min: i64,
    /// Cumulative distance from the origin.
    pub distance_km: f64,
}

impl ScheduleStop {
    /// Scheduled dwell at this stop in minutes.
    pub fn dwell_min(&self) -> i64 {
        self.sched_departure_min - self.sched_arrival_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub train_number: String,
    pub train_name: String,
    pub stops: Vec<ScheduleStop>,
    /// Member of the known-train training group.
    pub known: bool,
}

impl TrainSchedule {
    pub fn origin(&self) -> &ScheduleStop {
        &self.stops[0]
    }

    pub fn destination(&self) -> &ScheduleStop {
        &self.stops[self.stops.len() - 1]
    }

    pub fn station_codes(&self) -> Vec<StationCode> {
        self.stops.iter().map(|s| s.station.clone()).collect()
    }

    pub fn route_position(&self, station: &StationCode) -> Option<usize> {
        route_position(self, station)
    }
}

/// Position of `station` on the route, if the train stops there.
pub fn route_position(schedule: &TrainSchedule, station: &StationCode) -> Option<usize> {
    schedule
        .stops
        .iter()
        .find(|s| &s.station == station)
        .map(|s| s.stop_index)
}

/// Whether `s` looks like a train number: exactly five ASCII digits.
pub fn is_train_number(s: &str) -> bool {
    s.len() == 5 && s.bytes().all(|b| b.is_ascii_digit())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayObservation {
    pub train_number: String,
    pub date: NaiveDate,
    pub station: StationCode,
    pub late_minutes: f64,
}

impl DelayObservation {
    /// Builds an observation, clamping early arrivals at [`EARLY_ARRIVAL_FLOOR`].
    pub fn new(
        train_number: impl Into<String>,
        date: NaiveDate,
        station: StationCode,
        late_minutes: f64,
    ) -> Self {
        DelayObservation {
            train_number: train_number.into(),
            date,
            station,
            late_minutes: clamp_late_minutes(late_minutes),
        }
    }

    pub fn journey(&self) -> JourneyKey {
        JourneyKey::new(self.train_number.clone(), self.date)
    }
}

pub fn clamp_late_minutes(late: f64) -> f64 {
    if late < EARLY_ARRIVAL_FLOOR {
        EARLY_ARRIVAL_FLOOR
    } else {
        late
    }
}

/// One run of one train: (train number, departure date).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JourneyKey {
    pub train_number: String,
    pub date: NaiveDate,
}

impl JourneyKey {
    pub fn new(train_number: impl Into<String>, date: NaiveDate) -> Self {
        JourneyKey {
            train_number: train_number.into(),
            date,
        }
    }
}

impl fmt::Display for JourneyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.train_number, self.date)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkCatalog {
    pub trains: BTreeMap<String, TrainSchedule>,
    pub stations: BTreeMap<StationCode, String>,
}

impl NetworkCatalog {
    pub fn train(&self, number: &str) -> Option<&TrainSchedule> {
        self.trains.get(number)
    }

    pub fn station_name(&self, code: &StationCode) -> Option<&str> {
        self.stations.get(code).map(String::as_str)
    }

    pub fn insert_train(&mut self, schedule: TrainSchedule) {
        self.trains.insert(schedule.train_number.clone(), schedule);
    }

    pub fn known_trains(&self) -> impl Iterator<Item = &TrainSchedule> {
        self.trains.values().filter(|t| t.known)
    }

    pub fn unknown_trains(&self) -> impl Iterator<Item = &TrainSchedule> {
        self.trains.values().filter(|t| !t.known)
    }
}

/// Journey-level partition of a delay history.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: BTreeSet<JourneyKey>,
    pub validation: BTreeSet<JourneyKey>,
    pub test: BTreeSet<JourneyKey>,
    pub ratios: [f64; 3],
}

impl DatasetSplit {
    pub fn is_disjoint(&self) -> bool {
        self.train.is_disjoint(&self.validation)
            && self.train.is_disjoint(&self.test)
            && self.validation.is_disjoint(&self.test)
    }

    /// Keeps only journeys whose train satisfies `keep`.
    pub fn filter_trains(&self, mut keep: impl FnMut(&str) -> bool) -> DatasetSplit {
        let mut f = |set: &BTreeSet<JourneyKey>| {
            set.iter()
                .filter(|k| keep(&k.train_number))
                .cloned()
                .collect::<BTreeSet<_>>()
        };
        DatasetSplit {
            train: f(&self.train),
            validation: f(&self.validation),
            test: f(&self.test),
            ratios: self.ratios,
        }
    }
}
