//! Journey and route insights over observed or predicted per-stop delays:
//! average lateness, exceedance rates, where delay first appears, which stop
//! contributes most, whether delay is recovered before the destination, and
//! which trains suffer alike.
//!
//! Averages sum values in sorted order, so results do not depend on the
//! order observations arrive in.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::domain::{DelayObservation, NetworkCatalog, StationCode, TrainSchedule};
use crate::predictor::JourneyPrediction;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("no observations match the query")]
    NoData,
    #[error("unknown train {0}")]
    UnknownTrain(String),
    #[error("train {train} does not stop at {station}")]
    StationNotOnRoute { train: String, station: StationCode },
    #[error("need at least two stops with data")]
    TooFewStops,
    #[error("the reference station must come before the destination")]
    AtDestination,
}

impl AnalyticsError {
    pub fn code(&self) -> &'static str {
        match self {
            AnalyticsError::NoData => "no-data",
            AnalyticsError::UnknownTrain(_) => "unknown-train",
            AnalyticsError::StationNotOnRoute { .. } => "station-not-on-route",
            AnalyticsError::TooFewStops => "too-few-stops",
            AnalyticsError::AtDestination => "at-destination",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsConfig {
    /// A stop counts as delayed above this many minutes.
    pub delayed_threshold_min: f64,
    /// "Late" for exceedance rates.
    pub late_threshold_min: f64,
    /// Changes within this band count as unchanged.
    pub mitigation_band_min: f64,
    /// Shared stations required before two trains are compared.
    pub min_shared_stations: usize,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            delayed_threshold_min: 10.0,
            late_threshold_min: 60.0,
            mitigation_band_min: 5.0,
            min_shared_stations: 3,
        }
    }
}

/// Inclusive date window; open ends are unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

impl DateRange {
    pub fn all() -> Self {
        DateRange::default()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.from.is_none_or(|f| date >= f) && self.to.is_none_or(|t| date <= t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationSelector {
    Station(StationCode),
    Destination,
}

/// Delay at one stop of a route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopValue {
    pub stop_index: usize,
    pub station: StationCode,
    pub delay: f64,
}

/// Per-stop mean observed delay of one train over a date range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayProfile {
    pub train_number: String,
    pub stations: Vec<StationCode>,
    /// `None` where a stop has no observations in range.
    pub mean_late_min: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub range: DateRange,
}

impl DelayProfile {
    /// Stops with data, in route order.
    pub fn series(&self) -> Vec<StopValue> {
        self.stations
            .iter()
            .zip(&self.mean_late_min)
            .enumerate()
            .filter_map(|(i, (s, m))| {
                m.map(|delay| StopValue {
                    stop_index: i,
                    station: s.clone(),
                    delay,
                })
            })
            .collect()
    }

    pub fn mean_at(&self, station: &StationCode) -> Option<f64> {
        let i = self.stations.iter().position(|s| s == station)?;
        self.mean_late_min[i]
    }
}

/// Expected delays of a prediction as a series.
pub fn prediction_series(prediction: &JourneyPrediction) -> Vec<StopValue> {
    prediction
        .stops
        .iter()
        .map(|s| StopValue {
            stop_index: s.stop_index,
            station: s.station.clone(),
            delay: s.expected_late_min,
        })
        .collect()
}

/// Mean with values summed in ascending order.
fn stable_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

fn schedule<'a>(catalog: &'a NetworkCatalog, train: &str) -> Result<&'a TrainSchedule, AnalyticsError> {
    catalog
        .train(train)
        .ok_or_else(|| AnalyticsError::UnknownTrain(train.to_string()))
}

pub fn build_profile(
    catalog: &NetworkCatalog,
    observations: &[DelayObservation],
    train: &str,
    range: DateRange,
) -> Result<DelayProfile, AnalyticsError> {
    let schedule = schedule(catalog, train)?;
    let index: BTreeMap<&StationCode, usize> =
        schedule.stops.iter().map(|s| (&s.station, s.stop_index)).collect();
    let mut values = vec![Vec::new(); schedule.stops.len()];
    for o in observations {
        if o.train_number == train && range.contains(o.date) {
            if let Some(&i) = index.get(&o.station) {
                values[i].push(o.late_minutes);
            }
        }
    }
    Ok(DelayProfile {
        train_number: train.to_string(),
        stations: schedule.station_codes(),
        counts: values.iter().map(Vec::len).collect(),
        mean_late_min: values
            .iter_mut()
            .map(|v| (!v.is_empty()).then(|| stable_mean(v)))
            .collect(),
        range,
    })
}

fn selected_values(
    catalog: &NetworkCatalog,
    observations: &[DelayObservation],
    train: &str,
    station: &StationSelector,
    range: DateRange,
) -> Result<Vec<f64>, AnalyticsError> {
    let schedule = schedule(catalog, train)?;
    let code = match station {
        StationSelector::Destination => schedule.destination().station.clone(),
        StationSelector::Station(s) => {
            if schedule.route_position(s).is_none() {
                return Err(AnalyticsError::StationNotOnRoute {
                    train: train.to_string(),
                    station: s.clone(),
                });
            }
            s.clone()
        }
    };
    let values: Vec<f64> = observations
        .iter()
        .filter(|o| o.train_number == train && o.station == code && range.contains(o.date))
        .map(|o| o.late_minutes)
        .collect();
    if values.is_empty() {
        return Err(AnalyticsError::NoData);
    }
    Ok(values)
}

/// Mean late minutes at one station (or the destination) over a date range.
pub fn average_delay(
    catalog: &NetworkCatalog,
    observations: &[DelayObservation],
    train: &str,
    station: &StationSelector,
    range: DateRange,
) -> Result<f64, AnalyticsError> {
    let mut values = selected_values(catalog, observations, train, station, range)?;
    Ok(stable_mean(&mut values))
}

/// Fraction of days on which the delay strictly exceeded `threshold_min`.
pub fn pct_late_over(
    catalog: &NetworkCatalog,
    observations: &[DelayObservation],
    train: &str,
    station: &StationSelector,
    threshold_min: f64,
    range: DateRange,
) -> Result<f64, AnalyticsError> {
    let values = selected_values(catalog, observations, train, station, range)?;
    let over = values.iter().filter(|&&v| v > threshold_min).count();
    Ok(over as f64 / values.len() as f64)
}

/// The earliest stop whose delay exceeds `threshold_min`.
pub fn first_delay_station(series: &[StopValue], threshold_min: f64) -> Option<StopValue> {
    series.iter().find(|s| s.delay > threshold_min).cloned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bottleneck {
    pub stop_index: usize,
    pub station: StationCode,
    /// Delay gained over the preceding stop in the series.
    pub increment: f64,
}

/// The stop with the largest delay gain over its predecessor; ties go to the
/// earliest stop.
pub fn bottleneck_station(series: &[StopValue]) -> Result<Bottleneck, AnalyticsError> {
    if series.len() < 2 {
        return Err(AnalyticsError::TooFewStops);
    }
    let mut best: Option<Bottleneck> = None;
    for pair in series.windows(2) {
        let increment = pair[1].delay - pair[0].delay;
        if best.as_ref().is_none_or(|b| increment > b.increment) {
            best = Some(Bottleneck {
                stop_index: pair[1].stop_index,
                station: pair[1].station.clone(),
                increment,
            });
        }
    }
    best.ok_or(AnalyticsError::TooFewStops)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MitigationOutcome {
    Mitigated,
    Worsened,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mitigation {
    pub outcome: MitigationOutcome,
    pub station: StationCode,
    pub delay_at_station: f64,
    pub delay_at_destination: f64,
    /// Destination delay minus station delay.
    pub change: f64,
}

/// Compares the delay at `after_station` with the delay at the last stop of
/// the series.
pub fn delay_mitigated(
    series: &[StopValue],
    after_station: &StationCode,
    band_min: f64,
) -> Result<Mitigation, AnalyticsError> {
    let last = series.last().ok_or(AnalyticsError::NoData)?;
    let at = series
        .iter()
        .position(|s| &s.station == after_station)
        .ok_or_else(|| AnalyticsError::StationNotOnRoute {
            train: String::new(),
            station: after_station.clone(),
        })?;
    if at + 1 == series.len() {
        return Err(AnalyticsError::AtDestination);
    }
    let change = last.delay - series[at].delay;
    let outcome = if change < -band_min {
        MitigationOutcome::Mitigated
    } else if change > band_min {
        MitigationOutcome::Worsened
    } else {
        MitigationOutcome::Unchanged
    };
    Ok(Mitigation {
        outcome,
        station: after_station.clone(),
        delay_at_station: series[at].delay,
        delay_at_destination: last.delay,
        change,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub train_number: String,
    pub score: f64,
    pub n_shared_stations: usize,
}

/// Pearson correlation of per-station mean delays over the stations both
/// profiles have data for. `None` with too few shared stations or when
/// either side is constant.
pub fn profile_correlation(a: &DelayProfile, b: &DelayProfile, min_shared: usize) -> Option<(f64, usize)> {
    let bm: BTreeMap<&StationCode, f64> = b
        .stations
        .iter()
        .zip(&b.mean_late_min)
        .filter_map(|(s, m)| m.map(|m| (s, m)))
        .collect();
    let mut pairs: Vec<(&StationCode, f64, f64)> = a
        .stations
        .iter()
        .zip(&a.mean_late_min)
        .filter_map(|(s, m)| Some((s, (*m)?, *bm.get(s)?)))
        .collect();
    if pairs.len() < min_shared.max(2) {
        return None;
    }
    // Station order, so the score is symmetric in its arguments.
    pairs.sort_by(|p, q| p.0.cmp(q.0));
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.2).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(_, x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0), pairs.len()))
}

/// The `k` profiles most correlated with the query's, best first; ties go
/// to the lower train number. The query itself is ranked like any other
/// candidate if present in `profiles`.
pub fn train_similarity(
    profiles: &[DelayProfile],
    query: &str,
    k: usize,
    config: &AnalyticsConfig,
) -> Result<Vec<Similarity>, AnalyticsError> {
    let q = profiles
        .iter()
        .find(|p| p.train_number == query)
        .ok_or_else(|| AnalyticsError::UnknownTrain(query.to_string()))?;
    let mut out: Vec<Similarity> = profiles
        .iter()
        .filter_map(|p| {
            let (score, n) = profile_correlation(q, p, config.min_shared_stations)?;
            Some(Similarity {
                train_number: p.train_number.clone(),
                score,
                n_shared_stations: n,
            })
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.train_number.cmp(&b.train_number))
    });
    out.truncate(k);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestinationStats {
    pub station: StationCode,
    pub mean_late_min: f64,
    pub pct_late_over: f64,
    pub late_threshold_min: f64,
    pub n_observations: usize,
}

/// Everything the route analytics view shows for one train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSummary {
    pub profile: DelayProfile,
    pub destination: Option<DestinationStats>,
    pub first_delay: Option<StopValue>,
    pub bottleneck: Option<Bottleneck>,
}

pub fn route_summary(
    catalog: &NetworkCatalog,
    observations: &[DelayObservation],
    train: &str,
    range: DateRange,
    config: &AnalyticsConfig,
) -> Result<RouteSummary, AnalyticsError> {
    let profile = build_profile(catalog, observations, train, range)?;
    let series = profile.series();
    let destination = match average_delay(catalog, observations, train, &StationSelector::Destination, range) {
        Ok(mean) => Some(DestinationStats {
            station: profile.stations.last().cloned().expect("routes have stops"),
            mean_late_min: mean,
            pct_late_over: pct_late_over(
                catalog,
                observations,
                train,
                &StationSelector::Destination,
                config.late_threshold_min,
                range,
            )?,
            late_threshold_min: config.late_threshold_min,
            n_observations: *profile.counts.last().unwrap_or(&0),
        }),
        Err(AnalyticsError::NoData) => None,
        Err(e) => return Err(e),
    };
    Ok(RouteSummary {
        first_delay: first_delay_station(&series, config.delayed_threshold_min),
        bottleneck: bottleneck_station(&series).ok(),
        destination,
        profile,
    })
}

/// Observations grouped by train, for repeated per-train queries.
pub fn group_by_train(
    observations: impl IntoIterator<Item = DelayObservation>,
) -> BTreeMap<String, Vec<DelayObservation>> {
    let mut out: BTreeMap<String, Vec<DelayObservation>> = BTreeMap::new();
    for o in observations {
        out.entry(o.train_number.clone()).or_default().push(o);
    }
    out
}
