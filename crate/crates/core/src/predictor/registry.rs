use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::calibrate::{calibrate_intervals, ResidualQuantiles};
use super::features::{build_features, FeatureSchema, FEATURE_NAMES};
use super::infer::{chain_expected, route_plan, shared_plan, BundleChoice};
use super::{ModelKind, PredictError};
use crate::domain::{
    DatasetSplit, DelayObservation, JourneyKey, NetworkCatalog, StationCode, TrainSchedule,
};
use crate::mlcore::{
    forest_fit, mix_seed, ridge_fit, stable_hash, DesignMatrix, ForestConfig, ForestModel,
    RidgeModel,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleScope {
    Train(String),
    SharedStation,
}

/// Where a bundle's interval widths came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalibrationSource {
    Own { n_residuals: usize },
    /// Too few validation residuals; copied from the station's shared bundle.
    InheritedShared,
    /// Too few validation residuals; copied from the registry-wide pool.
    Global,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalPair {
    pub forest: ResidualQuantiles,
    pub ridge: ResidualQuantiles,
}

impl IntervalPair {
    pub fn get(&self, kind: ModelKind) -> ResidualQuantiles {
        match kind {
            ModelKind::Forest => self.forest,
            ModelKind::Ridge => self.ridge,
        }
    }

    fn max(self, other: IntervalPair) -> IntervalPair {
        IntervalPair {
            forest: self.forest.max(other.forest),
            ridge: self.ridge.max(other.ridge),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationModelBundle {
    pub station: StationCode,
    pub scope: BundleScope,
    pub forest: ForestModel,
    pub ridge: RidgeModel,
    pub residual_quantiles: IntervalPair,
    pub calibration: CalibrationSource,
    pub n_train_samples: usize,
}

impl StationModelBundle {
    pub fn predict(&self, kind: ModelKind, features: &[f64]) -> f64 {
        let r = match kind {
            ModelKind::Forest => self.forest.predict(features),
            ModelKind::Ridge => self.ridge.predict(features),
        };
        r.expect("bundle models are trained on the fixed feature schema")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingOptions {
    pub forest: ForestConfig,
    pub ridge_lambda: f64,
    /// Known trains with fewer training journeys are served as unknown.
    pub min_known_journeys: usize,
    /// Minimum training rows for a per-station model.
    pub min_station_samples: usize,
    /// Minimum validation residuals for a bundle to keep its own intervals.
    pub min_calibration_residuals: usize,
    /// Fit pooled per-station bundles. Disable for direct-only experiments.
    pub shared_bundles: bool,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        TrainingOptions {
            forest: ForestConfig::default(),
            ridge_lambda: 1.0,
            min_known_journeys: 30,
            min_station_samples: 20,
            min_calibration_residuals: 10,
            shared_bundles: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub options: TrainingOptions,
    pub train_date_range: Option<(NaiveDate, NaiveDate)>,
    pub n_train_journeys: usize,
    pub n_validation_journeys: usize,
    /// Known trains below `min_known_journeys`, served as unknown.
    pub demoted_trains: Vec<String>,
    /// `train/station` stops of modelled trains with too little data for
    /// their own bundle.
    pub shared_fallback_stops: Vec<String>,
    /// Widths from all validation residuals pooled.
    pub global_quantiles: IntervalPair,
    /// Largest width of any bundle, used when nothing on a route is modelled.
    pub widest_quantiles: IntervalPair,
}

/// Trained models for a whole network. Immutable after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRegistry {
    pub schema: FeatureSchema,
    /// Train number, then station, to that train's own bundle.
    pub direct: BTreeMap<String, BTreeMap<StationCode, StationModelBundle>>,
    pub shared: BTreeMap<StationCode, StationModelBundle>,
    pub metadata: TrainingMetadata,
}

impl ModelRegistry {
    pub fn is_modelled(&self, train_number: &str) -> bool {
        self.direct.contains_key(train_number)
    }

    pub fn n_bundles(&self) -> usize {
        self.direct.values().map(BTreeMap::len).sum::<usize>() + self.shared.len()
    }

    fn bundles_mut(&mut self) -> impl Iterator<Item = &mut StationModelBundle> {
        self.direct
            .values_mut()
            .flat_map(|m| m.values_mut())
            .chain(self.shared.values_mut())
    }
}

/// Observed delays per journey, aligned to the route (`None` where a stop has
/// no observation). Observations for stations off the route are ignored.
pub fn index_journeys(
    catalog: &NetworkCatalog,
    observations: &[DelayObservation],
) -> BTreeMap<JourneyKey, Vec<Option<f64>>> {
    let mut positions: HashMap<&str, HashMap<&StationCode, usize>> = HashMap::new();
    let mut out: BTreeMap<JourneyKey, Vec<Option<f64>>> = BTreeMap::new();
    for o in observations {
        let Some(schedule) = catalog.train(&o.train_number) else {
            continue;
        };
        let index = positions
            .entry(schedule.train_number.as_str())
            .or_insert_with(|| schedule.stops.iter().map(|s| (&s.station, s.stop_index)).collect());
        let Some(&i) = index.get(&o.station) else {
            continue;
        };
        out.entry(o.journey())
            .or_insert_with(|| vec![None; schedule.stops.len()])[i] = Some(o.late_minutes);
    }
    out
}

struct Rows {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Rows {
    fn new() -> Self {
        Rows { x: Vec::new(), y: Vec::new() }
    }

    fn len(&self) -> usize {
        self.y.len()
    }
}

/// Teacher-forced rows for one journey: the previous stop's observed delay
/// stands in for the chained prediction.
fn journey_rows<'a>(
    schedule: &'a TrainSchedule,
    date: NaiveDate,
    actual: &'a [Option<f64>],
) -> impl Iterator<Item = (usize, [f64; 6], f64)> + 'a {
    (0..actual.len()).filter_map(move |i| {
        let y = actual[i]?;
        let prev = if i == 0 { 0.0 } else { actual[i - 1]? };
        Some((i, build_features(schedule, i, date, prev), y))
    })
}

fn fit_bundle(
    station: StationCode,
    scope: BundleScope,
    rows: Rows,
    options: &TrainingOptions,
) -> Result<StationModelBundle, PredictError> {
    let context = match &scope {
        BundleScope::Train(t) => format!("{t}/{station}"),
        BundleScope::SharedStation => format!("shared/{station}"),
    };
    let fail = |source| PredictError::Fit {
        context: context.clone(),
        source,
    };
    let n = rows.len();
    let names = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let data = DesignMatrix::from_flat(rows.x, FEATURE_NAMES.len(), rows.y, names).map_err(fail)?;
    let config = ForestConfig {
        seed: mix_seed(options.forest.seed, stable_hash(context.as_bytes())),
        ..options.forest.clone()
    };
    let forest = forest_fit(&data, &config).map_err(fail)?;
    let ridge = ridge_fit(&data, options.ridge_lambda).map_err(fail)?;
    Ok(StationModelBundle {
        station,
        scope,
        forest,
        ridge,
        residual_quantiles: IntervalPair::default(),
        calibration: CalibrationSource::Global,
        n_train_samples: n,
    })
}

#[derive(Default)]
struct Residuals {
    forest: Vec<f64>,
    ridge: Vec<f64>,
}

impl Residuals {
    fn calibrate(&self, min: usize) -> Option<IntervalPair> {
        Some(IntervalPair {
            forest: calibrate_intervals(&self.forest, min)?,
            ridge: calibrate_intervals(&self.ridge, min)?,
        })
    }
}

/// Residuals of one validation journey, attributed to the bundle that served
/// each stop. Stops served by interpolation contribute nothing.
fn journey_residuals(
    schedule: &TrainSchedule,
    plan: &[BundleChoice<'_>],
    date: NaiveDate,
    actual: &[Option<f64>],
) -> Vec<(usize, f64, f64)> {
    let forest = chain_expected(schedule, plan, date, ModelKind::Forest);
    let ridge = chain_expected(schedule, plan, date, ModelKind::Ridge);
    (0..plan.len())
        .filter(|&i| matches!(plan[i], BundleChoice::Direct(_) | BundleChoice::Shared(_)))
        .filter_map(|i| actual[i].map(|y| (i, y - forest[i], y - ridge[i])))
        .collect()
}

/// Fits per-(train, station) bundles for known trains and pooled per-station
/// bundles, then calibrates interval widths on the validation split.
///
/// Direct bundles are calibrated on chained predictions along their own
/// route. Shared bundles are calibrated on known-train validation journeys
/// predicted as if the train were unknown, which is how they are used.
pub fn train_registry(
    catalog: &NetworkCatalog,
    observations: &[DelayObservation],
    split: &DatasetSplit,
    options: &TrainingOptions,
) -> Result<ModelRegistry, PredictError> {
    options.forest.validate().map_err(|source| PredictError::Fit {
        context: "forest config".into(),
        source,
    })?;
    let journeys = index_journeys(catalog, observations);
    let train_keys: Vec<&JourneyKey> =
        journeys.keys().filter(|k| split.train.contains(k)).collect();
    if train_keys.is_empty() {
        return Err(PredictError::EmptyTrainingSplit);
    }

    let mut per_train: BTreeMap<&str, usize> = BTreeMap::new();
    for k in &train_keys {
        *per_train.entry(k.train_number.as_str()).or_default() += 1;
    }
    let mut demoted = Vec::new();
    let mut modelled = BTreeSet::new();
    for t in catalog.known_trains() {
        let n = per_train.get(t.train_number.as_str()).copied().unwrap_or(0);
        if n >= options.min_known_journeys {
            modelled.insert(t.train_number.clone());
        } else {
            log::warn!(
                "train {} has {n} training journeys (< {}); serving it as unknown",
                t.train_number,
                options.min_known_journeys
            );
            demoted.push(t.train_number.clone());
        }
    }

    let mut direct_rows: BTreeMap<(String, usize), Rows> = BTreeMap::new();
    let mut shared_rows: BTreeMap<StationCode, Rows> = BTreeMap::new();
    for key in &train_keys {
        if !modelled.contains(&key.train_number) {
            continue;
        }
        let schedule = &catalog.trains[&key.train_number];
        for (i, x, y) in journey_rows(schedule, key.date, &journeys[*key]) {
            let d = direct_rows
                .entry((key.train_number.clone(), i))
                .or_insert_with(Rows::new);
            d.x.extend_from_slice(&x);
            d.y.push(y);
            if options.shared_bundles {
                let s = shared_rows
                    .entry(schedule.stops[i].station.clone())
                    .or_insert_with(Rows::new);
                s.x.extend_from_slice(&x);
                s.y.push(y);
            }
        }
    }

    let mut fallback_stops = Vec::new();
    let mut direct_jobs = Vec::new();
    for train in &modelled {
        let schedule = &catalog.trains[train];
        for stop in &schedule.stops {
            match direct_rows.remove(&(train.clone(), stop.stop_index)) {
                Some(rows) if rows.len() >= options.min_station_samples => {
                    direct_jobs.push((train.clone(), stop.station.clone(), rows))
                }
                _ => fallback_stops.push(format!("{train}/{}", stop.station)),
            }
        }
    }
    let shared_jobs: Vec<_> = shared_rows
        .into_iter()
        .filter(|(_, r)| r.len() >= options.min_station_samples)
        .collect();

    let direct_fitted: Vec<StationModelBundle> = direct_jobs
        .into_par_iter()
        .map(|(train, station, rows)| fit_bundle(station, BundleScope::Train(train), rows, options))
        .collect::<Result<_, _>>()?;
    let shared_fitted: Vec<StationModelBundle> = shared_jobs
        .into_par_iter()
        .map(|(station, rows)| fit_bundle(station, BundleScope::SharedStation, rows, options))
        .collect::<Result<_, _>>()?;

    let mut direct: BTreeMap<String, BTreeMap<StationCode, StationModelBundle>> = BTreeMap::new();
    for b in direct_fitted {
        let BundleScope::Train(t) = &b.scope else { unreachable!() };
        direct.entry(t.clone()).or_default().insert(b.station.clone(), b);
    }
    // A modelled train keeps an (possibly empty) entry so it is never
    // treated as unknown.
    for t in &modelled {
        direct.entry(t.clone()).or_default();
    }
    let shared = shared_fitted
        .into_iter()
        .map(|b| (b.station.clone(), b))
        .collect();

    let dates: Vec<NaiveDate> = train_keys.iter().map(|k| k.date).collect();
    let validation: Vec<(&JourneyKey, &Vec<Option<f64>>)> = journeys
        .iter()
        .filter(|(k, _)| split.validation.contains(k) && modelled.contains(&k.train_number))
        .collect();
    let mut registry = ModelRegistry {
        schema: FeatureSchema::default(),
        direct,
        shared,
        metadata: TrainingMetadata {
            options: options.clone(),
            train_date_range: dates.iter().min().copied().zip(dates.iter().max().copied()),
            n_train_journeys: train_keys.len(),
            n_validation_journeys: validation.len(),
            demoted_trains: demoted,
            shared_fallback_stops: fallback_stops,
            global_quantiles: IntervalPair::default(),
            widest_quantiles: IntervalPair::default(),
        },
    };
    calibrate_registry(&mut registry, catalog, &validation);
    Ok(registry)
}

fn calibrate_registry(
    registry: &mut ModelRegistry,
    catalog: &NetworkCatalog,
    validation: &[(&JourneyKey, &Vec<Option<f64>>)],
) {
    type Found = (Vec<(StationCode, usize, f64, f64)>, Vec<(StationCode, f64, f64)>);
    let found: Vec<Found> = validation
        .par_iter()
        .map(|(key, actual)| {
            let schedule = &catalog.trains[&key.train_number];
            let own = route_plan(registry, schedule);
            let direct = journey_residuals(schedule, &own, key.date, actual)
                .into_iter()
                .filter(|(i, _, _)| matches!(own[*i], BundleChoice::Direct(_)))
                .map(|(i, f, r)| (schedule.stops[i].station.clone(), i, f, r))
                .collect();
            let pooled = shared_plan(registry, schedule);
            let shared = journey_residuals(schedule, &pooled, key.date, actual)
                .into_iter()
                .map(|(i, f, r)| (schedule.stops[i].station.clone(), f, r))
                .collect();
            (direct, shared)
        })
        .collect();

    let mut direct_res: BTreeMap<(String, StationCode), Residuals> = BTreeMap::new();
    let mut shared_res: BTreeMap<StationCode, Residuals> = BTreeMap::new();
    let mut all = Residuals::default();
    for ((key, _), (direct, shared)) in validation.iter().zip(found) {
        for (station, _, f, r) in direct {
            let e = direct_res
                .entry((key.train_number.clone(), station))
                .or_default();
            e.forest.push(f);
            e.ridge.push(r);
            all.forest.push(f);
            all.ridge.push(r);
        }
        for (station, f, r) in shared {
            let e = shared_res.entry(station).or_default();
            e.forest.push(f);
            e.ridge.push(r);
            all.forest.push(f);
            all.ridge.push(r);
        }
    }

    let min = registry.metadata.options.min_calibration_residuals;
    let global = all.calibrate(1).unwrap_or_else(|| {
        log::warn!("validation split yielded no residuals; intervals have zero width");
        IntervalPair::default()
    });
    registry.metadata.global_quantiles = global;

    for (station, bundle) in registry.shared.iter_mut() {
        match shared_res.get(station).and_then(|r| r.calibrate(min)) {
            Some(q) => {
                bundle.residual_quantiles = q;
                bundle.calibration = CalibrationSource::Own {
                    n_residuals: shared_res[station].forest.len(),
                };
            }
            None => {
                bundle.residual_quantiles = global;
                bundle.calibration = CalibrationSource::Global;
            }
        }
    }
    let shared_own: BTreeMap<StationCode, IntervalPair> = registry
        .shared
        .iter()
        .filter(|(_, b)| matches!(b.calibration, CalibrationSource::Own { .. }))
        .map(|(s, b)| (s.clone(), b.residual_quantiles))
        .collect();
    for (train, bundles) in registry.direct.iter_mut() {
        for (station, bundle) in bundles.iter_mut() {
            let own = direct_res.remove(&(train.clone(), station.clone()));
            let (q, source) = match own.as_ref().and_then(|r| r.calibrate(min)) {
                Some(q) => (
                    q,
                    CalibrationSource::Own {
                        n_residuals: own.map_or(0, |r| r.forest.len()),
                    },
                ),
                None => match shared_own.get(station) {
                    Some(q) => (*q, CalibrationSource::InheritedShared),
                    None => (global, CalibrationSource::Global),
                },
            };
            bundle.residual_quantiles = q;
            bundle.calibration = source;
        }
    }

    let widest = registry
        .bundles_mut()
        .map(|b| b.residual_quantiles)
        .fold(global, IntervalPair::max);
    registry.metadata.widest_quantiles = widest;
}
