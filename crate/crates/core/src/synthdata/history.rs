use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{GeneratorConfig, GroundTruth, SynthError};
use crate::domain::{
    clamp_late_minutes, DelayObservation, JourneyKey, NetworkCatalog, StationCode, TrainSchedule,
};
use crate::mlcore::{mix_seed, stable_hash};

const CONGESTION_STREAM: u64 = 0x434f_4e47;
const SERVICE_STREAM: u64 = 0x5345_5256;

/// Base congestion of a station in minutes, before calendar multipliers.
/// Depends only on the seed and the station code.
pub fn station_base_congestion(config: &GeneratorConfig, station: &StationCode) -> f64 {
    if config.station_congestion_max <= 0.0 {
        return 0.0;
    }
    let seed = mix_seed(
        mix_seed(config.seed, CONGESTION_STREAM),
        stable_hash(station.as_str().as_bytes()),
    );
    ChaCha8Rng::seed_from_u64(seed).random_range(0.0..config.station_congestion_max)
}

struct DelayModel<'a> {
    config: &'a GeneratorConfig,
    base: BTreeMap<StationCode, f64>,
    noise: Option<Normal<f64>>,
}

impl DelayModel<'_> {
    fn added_delay(&self, station: &StationCode, date: NaiveDate) -> f64 {
        let weekday = date.weekday().num_days_from_monday() as usize;
        let month = date.month();
        let mut added = self.base.get(station).copied().unwrap_or(0.0)
            * self.config.weekday_multipliers[weekday]
            * self.config.month_multipliers[month as usize - 1];
        for b in &self.config.bottlenecks {
            if &b.station == station && b.active_months.contains(&month) {
                added += b.mean_added_delay;
            }
        }
        added
    }

    fn latent(&self, schedule: &TrainSchedule, date: NaiveDate) -> Vec<f64> {
        let alpha = self.config.propagation_alpha;
        let recovery = self.config.recovery_rate;
        let mut out = Vec::with_capacity(schedule.stops.len());
        out.push(0.0);
        for pair in schedule.stops.windows(2) {
            let prev = *out.last().unwrap_or(&0.0);
            let slack = pair[0].dwell_min() as f64;
            let next = alpha * prev + self.added_delay(&pair[1].station, date) - recovery * slack;
            out.push(next.max(0.0));
        }
        out
    }

    fn journey(
        &self,
        schedule: &TrainSchedule,
        date: NaiveDate,
        train_seed: u64,
    ) -> (Vec<f64>, Vec<DelayObservation>) {
        let latent = self.latent(schedule, date);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(train_seed, day_number(date)));
        let obs = schedule
            .stops
            .iter()
            .zip(&latent)
            .enumerate()
            .map(|(i, (stop, &l))| {
                let eps = self.noise.map_or(0.0, |n| n.sample(&mut rng));
                let late = if i == 0 { eps.max(0.0) } else { clamp_late_minutes(l + eps) };
                DelayObservation {
                    train_number: schedule.train_number.clone(),
                    date,
                    station: stop.station.clone(),
                    late_minutes: late,
                }
            })
            .collect();
        (latent, obs)
    }
}

fn day_number(date: NaiveDate) -> u64 {
    date.num_days_from_ce() as u64
}

/// Simulates one observation per stop for every journey in the date range.
///
/// Known trains run daily. Unknown trains run on a seeded subset of dates
/// (`unknown_service_fraction`), which is what keeps their history small.
/// Observations come out sorted by train, date and route order.
pub fn generate_delay_history(
    catalog: &NetworkCatalog,
    config: &GeneratorConfig,
) -> Result<(Vec<DelayObservation>, GroundTruth), SynthError> {
    config.validate()?;
    let noise = if config.noise_sigma > 0.0 {
        Some(
            Normal::new(0.0, config.noise_sigma)
                .map_err(|e| SynthError::InvalidConfig(e.to_string()))?,
        )
    } else {
        None
    };
    let model = DelayModel {
        config,
        base: catalog
            .stations
            .keys()
            .map(|s| (s.clone(), station_base_congestion(config, s)))
            .collect(),
        noise,
    };
    let dates: Vec<NaiveDate> = config.dates().collect();

    let per_train: Vec<_> = catalog
        .trains
        .values()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|schedule| {
            let train_seed = mix_seed(config.seed, stable_hash(schedule.train_number.as_bytes()));
            let service_seed = mix_seed(train_seed, SERVICE_STREAM);
            let mut latent = Vec::new();
            let mut obs = Vec::new();
            for &date in &dates {
                if !schedule.known {
                    let mut coin = ChaCha8Rng::seed_from_u64(mix_seed(service_seed, day_number(date)));
                    if !coin.random_bool(config.unknown_service_fraction) {
                        continue;
                    }
                }
                let (l, o) = model.journey(schedule, date, train_seed);
                latent.push((JourneyKey::new(schedule.train_number.clone(), date), l));
                obs.extend(o);
            }
            (schedule.train_number.clone(), latent, obs)
        })
        .collect();

    let mut truth = GroundTruth {
        bottleneck_stations: config.bottlenecks.iter().map(|b| b.station.clone()).collect(),
        ..GroundTruth::default()
    };
    let mut observations = Vec::new();
    for (train, latent, obs) in per_train {
        if !latent.is_empty() {
            let sum: f64 = latent.iter().map(|(_, l)| *l.last().unwrap_or(&0.0)).sum();
            truth
                .mean_destination_delay
                .insert(train, sum / latent.len() as f64);
        }
        truth.latent.extend(latent);
        observations.extend(obs);
    }
    Ok((observations, truth))
}
