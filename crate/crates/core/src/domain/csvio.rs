//! `schedules.csv` and `delays.csv` readers and writers.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DelayObservation, NetworkCatalog, ScheduleStop, StationCode, TrainSchedule};

pub const SCHEDULES_HEADER: [&str; 10] = [
    "train_number",
    "train_name",
    "known",
    "stop_index",
    "station_code",
    "station_name",
    "day_offset",
    "arrival_min",
    "departure_min",
    "distance_km",
];

pub const DELAYS_HEADER: [&str; 4] = ["train_number", "date", "station_code", "late_minutes"];

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: Vec<String>, expected: Vec<String> },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("station {code} has conflicting names {first:?} and {second:?}")]
    ConflictingStationName {
        code: String,
        first: String,
        second: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct ScheduleRow {
    train_number: String,
    train_name: String,
    known: String,
    stop_index: usize,
    station_code: String,
    station_name: String,
    day_offset: u32,
    arrival_min: i64,
    departure_min: i64,
    distance_km: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DelayRow {
    train_number: String,
    date: String,
    station_code: String,
    late_minutes: f64,
}

fn check_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), CsvError> {
    let found: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(CsvError::Header {
            found,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(())
}

fn parse_bool(row: usize, s: &str) -> Result<bool, CsvError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(CsvError::Row {
            row,
            message: format!("known must be true or false, got {other:?}"),
        }),
    }
}

pub fn read_schedules<R: Read>(input: R) -> Result<NetworkCatalog, CsvError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(&mut reader, &SCHEDULES_HEADER)?;

    let mut catalog = NetworkCatalog::default();
    let mut grouped: BTreeMap<String, (String, bool, Vec<ScheduleStop>)> = BTreeMap::new();
    for (i, row) in reader.deserialize::<ScheduleRow>().enumerate() {
        let row_no = i + 2;
        let row = row?;
        let code = StationCode::new(row.station_code);
        if let Some(existing) = catalog.stations.get(&code) {
            if existing != &row.station_name {
                return Err(CsvError::ConflictingStationName {
                    code: code.to_string(),
                    first: existing.clone(),
                    second: row.station_name,
                });
            }
        } else {
            catalog.stations.insert(code.clone(), row.station_name);
        }
        let known = parse_bool(row_no, &row.known)?;
        let entry = grouped
            .entry(row.train_number)
            .or_insert_with(|| (row.train_name.clone(), known, Vec::new()));
        entry.2.push(ScheduleStop {
            station: code,
            stop_index: row.stop_index,
            day_offset: row.day_offset,
            sched_arrival_min: row.arrival_min,
            sched_departure_min: row.departure_min,
            distance_km: row.distance_km,
        });
    }

    for (train_number, (train_name, known, mut stops)) in grouped {
        stops.sort_by_key(|s| s.stop_index);
        catalog.insert_train(TrainSchedule {
            train_number,
            train_name,
            stops,
            known,
        });
    }
    Ok(catalog)
}

pub fn write_schedules<W: Write>(catalog: &NetworkCatalog, out: W) -> Result<(), CsvError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(SCHEDULES_HEADER)?;
    for schedule in catalog.trains.values() {
        for stop in &schedule.stops {
            let name = catalog
                .station_name(&stop.station)
                .unwrap_or(stop.station.as_str());
            writer.serialize(ScheduleRow {
                train_number: schedule.train_number.clone(),
                train_name: schedule.train_name.clone(),
                known: schedule.known.to_string(),
                stop_index: stop.stop_index,
                station_code: stop.station.to_string(),
                station_name: name.to_string(),
                day_offset: stop.day_offset,
                arrival_min: stop.sched_arrival_min,
                departure_min: stop.sched_departure_min,
                distance_km: stop.distance_km,
            })?;
        }
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads `delays.csv`. Late minutes below the early-arrival floor are clamped.
pub fn read_delays<R: Read>(input: R) -> Result<Vec<DelayObservation>, CsvError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(&mut reader, &DELAYS_HEADER)?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<DelayRow>().enumerate() {
        let row = row?;
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d").map_err(|e| CsvError::Row {
            row: i + 2,
            message: format!("bad date {:?}: {e}", row.date),
        })?;
        out.push(DelayObservation::new(
            row.train_number,
            date,
            StationCode::new(row.station_code),
            row.late_minutes,
        ));
    }
    Ok(out)
}

pub fn write_delays<W: Write>(observations: &[DelayObservation], out: W) -> Result<(), CsvError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(DELAYS_HEADER)?;
    for obs in observations {
        writer.serialize(DelayRow {
            train_number: obs.train_number.clone(),
            date: obs.date.format("%Y-%m-%d").to_string(),
            station_code: obs.station.to_string(),
            late_minutes: obs.late_minutes,
        })?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}
