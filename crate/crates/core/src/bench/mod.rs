//! Timing studies: journey prediction time and error against forest size,
//! and ridge prediction time against route length.
//!
//! Timings are medians over repetitions after discarded warm-up runs. Only
//! their shape (linear growth, invariance) is meaningful; absolute values
//! depend on the machine.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::domain::{DatasetSplit, JourneyKey};
use crate::mlcore::ForestConfig;
use crate::predictor::{
    evaluate_ci_accuracy, predict_journey, train_registry, CiLevel, ModelKind, ModelRegistry,
    PredictError, PredictionRequest, TrainingOptions,
};
use crate::synthdata::{generate_dataset, split_dataset, GeneratorConfig, SynthError, SyntheticDataset};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error("no test journeys to time")]
    NoJourneys,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub seed: u64,
    pub repetitions: usize,
    pub warmup: usize,
    /// Days of history generated for each bench train.
    pub days: u64,
    /// Journeys predicted per timed repetition, cycling through the test
    /// split when it is shorter.
    pub journeys_per_rep: usize,
    /// Forest size used where only ridge is under study.
    pub contrast_trees: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 13050,
            repetitions: 11,
            warmup: 2,
            days: 365,
            journeys_per_rep: 200,
            contrast_trees: 50,
        }
    }
}

/// One synthetic train with `n_stops` stops and its history.
pub struct BenchData {
    pub data: SyntheticDataset,
    pub split: DatasetSplit,
    pub train_number: String,
}

impl BenchData {
    pub fn generate(n_stops: usize, days: u64, seed: u64) -> Result<Self, BenchError> {
        let start = NaiveDate::from_ymd_opt(2017, 1, 1).expect("valid date");
        let config = GeneratorConfig {
            seed,
            n_known_trains: 1,
            n_unknown_trains: 0,
            stations_per_train: (n_stops, n_stops),
            n_corridors: 1,
            corridor_length: 2 * n_stops,
            start_date: start,
            end_date: start + Days::new(days.saturating_sub(1)),
            ..GeneratorConfig::default()
        };
        let data = generate_dataset(&config)?;
        let split = split_dataset(&data.observations, [0.6, 0.2, 0.2], seed)?;
        let train_number = data.catalog.trains.keys().next().cloned().expect("one train generated");
        Ok(BenchData { data, split, train_number })
    }

    fn test_dates(&self, n: usize) -> Vec<NaiveDate> {
        if self.split.test.is_empty() {
            return Vec::new();
        }
        self.split.test.iter().cycle().take(n).map(|k| k.date).collect()
    }
}

/// Median of `reps` timings of `f` in milliseconds, after `warmup` untimed calls.
pub fn median_ms(reps: usize, warmup: usize, mut f: impl FnMut()) -> f64 {
    for _ in 0..warmup {
        f();
    }
    let mut times: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

fn journey_requests(bench: &BenchData, kind: ModelKind, config: &BenchConfig) -> Result<Vec<PredictionRequest>, BenchError> {
    let dates = bench.test_dates(config.journeys_per_rep);
    if dates.is_empty() {
        return Err(BenchError::NoJourneys);
    }
    Ok(dates
        .iter()
        .map(|&d| PredictionRequest {
            model_kind: kind,
            ..PredictionRequest::new(bench.train_number.clone(), d)
        })
        .collect())
}

/// Predicts every request once; returns elapsed milliseconds.
fn time_requests(registry: &ModelRegistry, bench: &BenchData, requests: &[PredictionRequest]) -> f64 {
    let t = Instant::now();
    for r in requests {
        std::hint::black_box(predict_journey(registry, &bench.data.catalog, r).ok());
    }
    t.elapsed().as_secs_f64() * 1e3
}

/// Median time to predict one whole journey.
fn journey_predict_ms(
    registry: &ModelRegistry,
    bench: &BenchData,
    kind: ModelKind,
    config: &BenchConfig,
) -> Result<f64, BenchError> {
    let requests = journey_requests(bench, kind, config)?;
    // Fails fast on a bad request rather than inside the timed loop.
    predict_journey(registry, &bench.data.catalog, &requests[0])?;
    let total = median_ms(config.repetitions, config.warmup, || {
        time_requests(registry, bench, &requests);
    });
    Ok(total / requests.len() as f64)
}

fn options(n_trees: usize, seed: u64) -> TrainingOptions {
    TrainingOptions {
        forest: ForestConfig {
            n_trees,
            seed,
            ..ForestConfig::default()
        },
        shared_bundles: false,
        ..TrainingOptions::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub n_trees: usize,
    pub fit_s: f64,
    pub predict_ms_per_journey: f64,
    pub rmse: f64,
}

/// Fits a forest of each size on the bench train and records fit time,
/// median journey prediction time and test RMSE.
pub fn run_tradeoff(
    bench: &BenchData,
    tree_counts: &[usize],
    config: &BenchConfig,
) -> Result<Vec<TradeoffRow>, BenchError> {
    let test: BTreeSet<JourneyKey> = bench.split.test.clone();
    let mut rows = Vec::with_capacity(tree_counts.len());
    for &n_trees in tree_counts {
        let started = Instant::now();
        let registry = train_registry(
            &bench.data.catalog,
            &bench.data.observations,
            &bench.split,
            &options(n_trees, config.seed),
        )?;
        let fit_s = started.elapsed().as_secs_f64();
        let predict_ms_per_journey = journey_predict_ms(&registry, bench, ModelKind::Forest, config)?;
        let report = evaluate_ci_accuracy(
            &registry,
            &bench.data.catalog,
            &bench.data.observations,
            &test,
            CiLevel::L99,
            ModelKind::Forest,
        )?;
        log::info!("tradeoff: {n_trees} trees, {predict_ms_per_journey:.3} ms/journey, rmse {:.3}", report.rmse);
        rows.push(TradeoffRow {
            n_trees,
            fit_s,
            predict_ms_per_journey,
            rmse: report.rmse,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrScalingRow {
    pub n_stations: usize,
    pub predict_ms: f64,
    /// Forest prediction time on the same train, for contrast.
    pub forest_predict_ms: f64,
}

/// Median ridge and forest journey prediction time for a synthetic train
/// of each route length.
pub fn run_rr_scaling(station_counts: &[usize], config: &BenchConfig) -> Result<Vec<RrScalingRow>, BenchError> {
    let mut rows = Vec::with_capacity(station_counts.len());
    for &n in station_counts {
        let bench = BenchData::generate(n, config.days, config.seed)?;
        let registry = train_registry(
            &bench.data.catalog,
            &bench.data.observations,
            &bench.split,
            &options(config.contrast_trees, config.seed),
        )?;
        rows.push(RrScalingRow {
            n_stations: n,
            predict_ms: journey_predict_ms(&registry, &bench, ModelKind::Ridge, config)?,
            forest_predict_ms: journey_predict_ms(&registry, &bench, ModelKind::Forest, config)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrDoublingReport {
    pub n_stations: usize,
    pub base_days: u64,
    pub base_ms: f64,
    pub doubled_ms: f64,
    /// `doubled_ms / base_ms`.
    pub ratio: f64,
}

/// Ridge journey prediction time for the same route trained on `days` and
/// on `2 * days` of history.
///
/// Both registries are built before any timing, and repetitions alternate
/// between them so drift in machine load affects both sides alike.
pub fn run_rr_doubling(n_stations: usize, config: &BenchConfig) -> Result<RrDoublingReport, BenchError> {
    let mut worlds = Vec::with_capacity(2);
    for days in [config.days, 2 * config.days] {
        let bench = BenchData::generate(n_stations, days, config.seed)?;
        let registry = train_registry(
            &bench.data.catalog,
            &bench.data.observations,
            &bench.split,
            &options(1, config.seed),
        )?;
        let requests = journey_requests(&bench, ModelKind::Ridge, config)?;
        predict_journey(&registry, &bench.data.catalog, &requests[0])?;
        worlds.push((bench, registry, requests));
    }
    let mut samples = [Vec::new(), Vec::new()];
    for rep in 0..config.warmup + config.repetitions.max(1) {
        for (slot, (bench, registry, requests)) in worlds.iter().enumerate() {
            let ms = time_requests(registry, bench, requests) / requests.len() as f64;
            if rep >= config.warmup {
                samples[slot].push(ms);
            }
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let base_ms = median(&mut samples[0]);
    let doubled_ms = median(&mut samples[1]);
    Ok(RrDoublingReport {
        n_stations,
        base_days: config.days,
        base_ms,
        doubled_ms,
        ratio: doubled_ms / base_ms,
    })
}

/// Rows as CSV with a header.
pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated `n_trees predict_ms rmse` columns for gnuplot and
/// similar tools.
pub fn write_tradeoff_plot_data(rows: &[TradeoffRow], mut out: impl Write) -> Result<(), BenchError> {
    writeln!(out, "# n_trees predict_ms_per_journey rmse")?;
    for r in rows {
        writeln!(out, "{} {:.6} {:.6}", r.n_trees, r.predict_ms_per_journey, r.rmse)?;
    }
    Ok(())
}

/// Coefficient of determination of the least-squares line `y ~ a + b x`.
pub fn linear_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy * sxy / (sxx * syy)
}
