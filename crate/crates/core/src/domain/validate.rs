use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{
    is_train_number, DelayObservation, NetworkCatalog, StationCode, TrainSchedule,
    EARLY_ARRIVAL_FLOOR,
};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn with_rule<'a>(&'a self, rule: &'a str) -> impl Iterator<Item = &'a Violation> + 'a {
        self.violations.iter().filter(move |v| v.rule == rule)
    }

    fn push(&mut self, entity: impl Into<String>, rule: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            entity: entity.into(),
            rule: rule.to_string(),
            message: message.into(),
        });
    }
}

/// Checks every catalog and observation invariant.
///
/// Violations are returned sorted, so the report does not depend on the order
/// of `observations`.
pub fn validate_catalog(
    catalog: &NetworkCatalog,
    observations: &[DelayObservation],
) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (code, name) in &catalog.stations {
        if !code.is_well_formed() {
            report.push(
                format!("station/{code}"),
                "station-code-format",
                format!("station code {code:?} must be 1-8 uppercase letters or digits"),
            );
        }
        if name.trim().is_empty() {
            report.push(
                format!("station/{code}"),
                "station-name-empty",
                "station has an empty display name",
            );
        }
    }

    for (key, schedule) in &catalog.trains {
        if key != &schedule.train_number {
            report.push(
                format!("train/{key}"),
                "train-key-mismatch",
                format!("catalog key {key} holds train {}", schedule.train_number),
            );
        }
        validate_schedule(catalog, schedule, &mut report);
    }

    validate_observations(catalog, observations, &mut report);

    report.violations.sort();
    report
}

fn validate_schedule(catalog: &NetworkCatalog, s: &TrainSchedule, report: &mut ValidationReport) {
    let train = &s.train_number;
    if !is_train_number(train) {
        report.push(
            format!("train/{train}"),
            "train-number-format",
            "train number must be exactly five digits",
        );
    }
    if s.stops.len() < 2 {
        report.push(
            format!("train/{train}"),
            "min-stops",
            format!("route has {} stop(s); at least 2 required", s.stops.len()),
        );
    }

    let mut seen: HashSet<&StationCode> = HashSet::new();
    for (pos, stop) in s.stops.iter().enumerate() {
        let entity = format!("train/{train}/stop/{pos}");
        if stop.stop_index != pos {
            report.push(
                &entity,
                "stop-index-sequence",
                format!("stop at position {pos} has stop_index {}", stop.stop_index),
            );
        }
        if !stop.station.is_well_formed() {
            report.push(
                &entity,
                "station-code-format",
                format!("station code {:?} is malformed", stop.station.as_str()),
            );
        }
        if !catalog.stations.contains_key(&stop.station) {
            report.push(
                &entity,
                "station-in-catalog",
                format!("station {} is not in the station table", stop.station),
            );
        }
        if !seen.insert(&stop.station) {
            report.push(
                &entity,
                "station-unique-on-route",
                format!("station {} appears more than once on the route", stop.station),
            );
        }
        if stop.sched_departure_min < stop.sched_arrival_min {
            report.push(
                &entity,
                "departure-after-arrival",
                format!(
                    "departure {} precedes arrival {}",
                    stop.sched_departure_min, stop.sched_arrival_min
                ),
            );
        }
        if !stop.distance_km.is_finite() {
            report.push(&entity, "distance-finite", "distance_km is not finite");
        }
        if pos == 0 {
            if stop.distance_km != 0.0 {
                report.push(
                    &entity,
                    "origin-distance-zero",
                    format!("origin distance is {} km, expected 0", stop.distance_km),
                );
            }
            continue;
        }
        let prev = &s.stops[pos - 1];
        if stop.sched_arrival_min <= prev.sched_arrival_min {
            report.push(
                &entity,
                "arrival-monotone",
                format!(
                    "arrival {} does not exceed previous arrival {}",
                    stop.sched_arrival_min, prev.sched_arrival_min
                ),
            );
        }
        if !(stop.distance_km > prev.distance_km) {
            report.push(
                &entity,
                "distance-monotone",
                format!(
                    "distance {} km does not exceed previous {} km",
                    stop.distance_km, prev.distance_km
                ),
            );
        }
    }
}

fn validate_observations(
    catalog: &NetworkCatalog,
    observations: &[DelayObservation],
    report: &mut ValidationReport,
) {
    let mut counts: HashMap<(&str, chrono::NaiveDate, &StationCode), usize> = HashMap::new();
    for obs in observations {
        let entity = format!("obs/{}/{}/{}", obs.train_number, obs.date, obs.station);
        *counts
            .entry((obs.train_number.as_str(), obs.date, &obs.station))
            .or_default() += 1;

        match catalog.train(&obs.train_number) {
            None => report.push(
                &entity,
                "obs-train-exists",
                format!("train {} is not in the catalog", obs.train_number),
            ),
            Some(schedule) => {
                if schedule.route_position(&obs.station).is_none() {
                    report.push(
                        &entity,
                        "obs-station-on-route",
                        format!(
                            "station {} is not on the route of train {}",
                            obs.station, obs.train_number
                        ),
                    );
                }
            }
        }
        if !obs.late_minutes.is_finite() {
            report.push(&entity, "obs-late-finite", "late_minutes is not finite");
        } else if obs.late_minutes < EARLY_ARRIVAL_FLOOR {
            report.push(
                &entity,
                "obs-late-floor",
                format!(
                    "late_minutes {} is below the floor of {EARLY_ARRIVAL_FLOOR}",
                    obs.late_minutes
                ),
            );
        }
    }

    for ((train, date, station), n) in counts {
        for _ in 1..n {
            report.push(
                format!("obs/{train}/{date}/{station}"),
                "obs-duplicate",
                "more than one observation for this train, date and station",
            );
        }
    }
}
