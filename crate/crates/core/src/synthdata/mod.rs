//! Seeded synthetic rail network and delay history with known ground truth.
//!
//! The delay process along one journey is an additive, clamped
//! auto-regression over stops:
//!
//! ```text
//! latent[0]   = 0
//! latent[i+1] = max(0, alpha * latent[i] + congestion(station[i+1], date)
//!                      + bottleneck(station[i+1], date) - recovery * slack[i])
//! observed[0] = max(0, eps[0])
//! observed[i] = max(-30, latent[i] + eps[i])          eps ~ Normal(0, sigma^2)
//! ```
//!
//! `slack[i]` is the scheduled dwell at stop `i`. Congestion is a per-station
//! base level scaled by weekday and month multipliers. Every random draw comes
//! from a stream derived from the config seed and the journey, so output does
//! not depend on generation order.

mod demo;
mod history;
mod network;
mod split;

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::domain::{DelayObservation, JourneyKey, NetworkCatalog, StationCode};

pub use demo::demo_catalog;
pub use history::{generate_delay_history, station_base_congestion};
pub use network::{corridor_station_code, generate_network};
pub use split::split_dataset;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("unknown scenario {0:?} (expected smooth, bottlenecked, messy or demo)")]
    UnknownScenario(String),
}

/// A station that adds a fixed delay to every train arriving in its active months.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottleneckSpec {
    pub station: StationCode,
    pub mean_added_delay: f64,
    /// Calendar months 1-12.
    pub active_months: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_known_trains: usize,
    pub n_unknown_trains: usize,
    /// Inclusive range of stops per route.
    pub stations_per_train: (usize, usize),
    pub start_date: NaiveDate,
    /// Inclusive.
    pub end_date: NaiveDate,
    pub noise_sigma: f64,
    pub propagation_alpha: f64,
    /// Minutes of delay recovered per minute of scheduled dwell.
    pub recovery_rate: f64,
    pub bottlenecks: Vec<BottleneckSpec>,
    /// Monday first.
    pub weekday_multipliers: [f64; 7],
    /// January first.
    pub month_multipliers: [f64; 12],
    /// Each station's base congestion is drawn uniformly from `[0, max)` minutes.
    pub station_congestion_max: f64,
    pub n_corridors: usize,
    pub corridor_length: usize,
    /// Fraction of dates on which an unknown train runs.
    pub unknown_service_fraction: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 42,
            n_known_trains: 52,
            n_unknown_trains: 83,
            stations_per_train: (8, 40),
            start_date: NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(),
            end_date: NaiveDate::from_ymd_opt(2017, 12, 31).unwrap(),
            noise_sigma: 4.0,
            propagation_alpha: 0.85,
            recovery_rate: 0.15,
            bottlenecks: Vec::new(),
            weekday_multipliers: [1.0, 0.9, 0.9, 1.0, 1.2, 1.4, 1.3],
            month_multipliers: [1.8, 1.5, 1.0, 0.9, 0.9, 1.0, 1.3, 1.4, 1.2, 1.0, 1.1, 1.7],
            station_congestion_max: 6.0,
            n_corridors: 6,
            corridor_length: 120,
            unknown_service_fraction: 0.5,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        let (lo, hi) = self.stations_per_train;
        if lo < 2 || lo > hi {
            return bad(format!("stations_per_train must satisfy 2 <= lo <= hi, got {lo}..={hi}"));
        }
        if hi > self.corridor_length {
            return bad(format!(
                "stations_per_train upper bound {hi} exceeds corridor length {}",
                self.corridor_length
            ));
        }
        if self.corridor_length > 26 * 26 || self.n_corridors == 0 || self.n_corridors > 26 {
            return bad("need 1-26 corridors of at most 676 stations".into());
        }
        if self.end_date < self.start_date {
            return bad("end_date precedes start_date".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.propagation_alpha) {
            return bad("propagation_alpha must lie in [0, 1]".into());
        }
        if !(self.recovery_rate >= 0.0) || !(self.station_congestion_max >= 0.0) {
            return bad("recovery_rate and station_congestion_max must be >= 0".into());
        }
        if self
            .weekday_multipliers
            .iter()
            .chain(&self.month_multipliers)
            .any(|m| !(*m >= 0.0))
        {
            return bad("congestion multipliers must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.unknown_service_fraction) {
            return bad("unknown_service_fraction must lie in [0, 1]".into());
        }
        for b in &self.bottlenecks {
            if !(b.mean_added_delay >= 0.0) || b.active_months.iter().any(|m| !(1..=12).contains(m)) {
                return bad(format!("bad bottleneck spec for {}", b.station));
            }
        }
        if self.n_known_trains + self.n_unknown_trains > 20_000 {
            return bad("too many trains for the five-digit number space".into());
        }
        Ok(())
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.start_date
            .iter_days()
            .take_while(move |d| *d <= self.end_date)
    }
}

/// The generator's noise-free state, for checking analytics against.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Per journey, latent delay at each stop in route order (before noise).
    pub latent: BTreeMap<JourneyKey, Vec<f64>>,
    pub bottleneck_stations: Vec<StationCode>,
    /// Per train, mean latent delay at its destination over all its journeys.
    pub mean_destination_delay: BTreeMap<String, f64>,
}

impl GroundTruth {
    pub fn write_csv<W: Write>(&self, catalog: &NetworkCatalog, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["train_number", "date", "station_code", "latent_delay"])?;
        for (key, values) in &self.latent {
            let Some(schedule) = catalog.train(&key.train_number) else {
                continue;
            };
            for (stop, v) in schedule.stops.iter().zip(values) {
                w.write_record([
                    key.train_number.as_str(),
                    &key.date.format("%Y-%m-%d").to_string(),
                    stop.station.as_str(),
                    &v.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Named, seeded data configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Low noise, no bottlenecks.
    Smooth,
    /// One dominant bottleneck station mid-way along the first corridor.
    Bottlenecked,
    /// Heavy noise and several bottlenecks.
    Messy,
    /// A small hand-written network of real Indian Railways trains.
    Demo,
}

impl std::str::FromStr for Scenario {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "smooth" => Ok(Scenario::Smooth),
            "bottlenecked" => Ok(Scenario::Bottlenecked),
            "messy" => Ok(Scenario::Messy),
            "demo" => Ok(Scenario::Demo),
            other => Err(SynthError::UnknownScenario(other.to_string())),
        }
    }
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Smooth => "smooth",
            Scenario::Bottlenecked => "bottlenecked",
            Scenario::Messy => "messy",
            Scenario::Demo => "demo",
        }
    }

    pub fn config(self, seed: u64) -> GeneratorConfig {
        let base = GeneratorConfig {
            seed,
            ..GeneratorConfig::default()
        };
        match self {
            Scenario::Smooth => base,
            Scenario::Bottlenecked => GeneratorConfig {
                noise_sigma: 6.0,
                station_congestion_max: 5.0,
                bottlenecks: vec![BottleneckSpec {
                    station: corridor_station_code(0, base.corridor_length / 2),
                    mean_added_delay: 40.0,
                    active_months: vec![1, 2, 5, 6, 7, 8, 9, 10, 11, 12],
                }],
                ..base
            },
            Scenario::Messy => GeneratorConfig {
                noise_sigma: 15.0,
                propagation_alpha: 0.9,
                recovery_rate: 0.1,
                station_congestion_max: 8.0,
                stations_per_train: (8, 120),
                bottlenecks: vec![
                    BottleneckSpec {
                        station: corridor_station_code(0, 40),
                        mean_added_delay: 35.0,
                        active_months: vec![12, 1, 2],
                    },
                    BottleneckSpec {
                        station: corridor_station_code(1, 70),
                        mean_added_delay: 25.0,
                        active_months: (1..=12).collect(),
                    },
                    BottleneckSpec {
                        station: corridor_station_code(2, 55),
                        mean_added_delay: 50.0,
                        active_months: vec![7, 8, 9],
                    },
                ],
                ..base
            },
            Scenario::Demo => demo::demo_config(seed),
        }
    }
}

/// Everything one scenario run produces.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub config: GeneratorConfig,
    pub catalog: NetworkCatalog,
    pub observations: Vec<DelayObservation>,
    pub truth: GroundTruth,
}

pub fn generate_dataset(config: &GeneratorConfig) -> Result<SyntheticDataset, SynthError> {
    let catalog = generate_network(config)?;
    let (observations, truth) = generate_delay_history(&catalog, config)?;
    Ok(SyntheticDataset {
        config: config.clone(),
        catalog,
        observations,
        truth,
    })
}

pub fn generate_scenario(scenario: Scenario, seed: u64) -> Result<SyntheticDataset, SynthError> {
    let config = scenario.config(seed);
    let catalog = match scenario {
        Scenario::Demo => demo_catalog(),
        _ => generate_network(&config)?,
    };
    let (observations, truth) = generate_delay_history(&catalog, &config)?;
    Ok(SyntheticDataset {
        config,
        catalog,
        observations,
        truth,
    })
}
