use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::domain::TrainSchedule;

pub const FEATURE_NAMES: [&str; 6] = [
    "month",
    "day_of_week",
    "stop_index",
    "distance_km",
    "sched_elapsed_min",
    "prev_predicted_delay_min",
];

/// Ordered feature names, stored in every saved registry so a bundle trained
/// with a different layout is rejected rather than silently misread.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        FeatureSchema {
            names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Feature vector for one stop of one journey. Everything here is known
/// before the train departs. `prev_predicted_delay` is ignored at the origin.
pub fn build_features(
    schedule: &TrainSchedule,
    stop_index: usize,
    date: NaiveDate,
    prev_predicted_delay: f64,
) -> [f64; 6] {
    let stop = &schedule.stops[stop_index];
    [
        date.month() as f64,
        date.weekday().num_days_from_monday() as f64,
        stop_index as f64,
        stop.distance_km,
        stop.sched_arrival_min as f64,
        if stop_index == 0 { 0.0 } else { prev_predicted_delay },
    ]
}
