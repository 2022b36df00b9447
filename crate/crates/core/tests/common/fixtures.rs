//! Small seeded datasets and registries shared by integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trainbot_core::analytics::{DateRange, DelayProfile};
use trainbot_core::domain::{DatasetSplit, NetworkCatalog, ScheduleStop, StationCode, TrainSchedule};
use trainbot_core::mlcore::{ForestConfig, ForestModel, RegressionTree, RidgeModel, TreeNode};
use trainbot_core::predictor::{
    train_registry, BundleScope, CalibrationSource, FeatureSchema, IntervalPair, ModelRegistry,
    ResidualQuantiles, StationModelBundle, TrainingMetadata, TrainingOptions,
};
use trainbot_core::synthdata::{
    generate_dataset, generate_scenario, split_dataset, GeneratorConfig, Scenario, SyntheticDataset,
};

pub struct World {
    pub data: SyntheticDataset,
    pub split: DatasetSplit,
    pub registry: ModelRegistry,
}

pub fn small_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        n_known_trains: 6,
        n_unknown_trains: 6,
        stations_per_train: (8, 14),
        n_corridors: 2,
        corridor_length: 30,
        end_date: NaiveDate::from_ymd_opt(2017, 8, 31).unwrap(),
        ..GeneratorConfig::default()
    }
}

pub fn small_options() -> TrainingOptions {
    TrainingOptions {
        forest: ForestConfig {
            n_trees: 20,
            ..ForestConfig::default()
        },
        ..TrainingOptions::default()
    }
}

pub fn build_world(config: &GeneratorConfig, options: &TrainingOptions) -> World {
    let data = generate_dataset(config).unwrap();
    let split = split_dataset(&data.observations, [0.6, 0.2, 0.2], config.seed).unwrap();
    let registry = train_registry(&data.catalog, &data.observations, &split, options).unwrap();
    World { data, split, registry }
}

/// A twelve-train network trained once per test binary.
pub fn small_world() -> &'static World {
    static WORLD: OnceLock<World> = OnceLock::new();
    WORLD.get_or_init(|| build_world(&small_config(7), &small_options()))
}

/// The five-train demo network with its year of history, trained once.
pub fn demo_world() -> &'static World {
    static WORLD: OnceLock<World> = OnceLock::new();
    WORLD.get_or_init(|| {
        let data = generate_scenario(Scenario::Demo, 42).unwrap();
        let split = split_dataset(&data.observations, [0.6, 0.2, 0.2], 42).unwrap();
        let registry = train_registry(&data.catalog, &data.observations, &split, &TrainingOptions::default()).unwrap();
        World { data, split, registry }
    })
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// A straight route `codes[i]` at `km[i]`, 1 minute per km, no dwell.
pub fn straight_route(number: &str, codes: &[&str], km: &[f64], known: bool) -> TrainSchedule {
    TrainSchedule {
        train_number: number.into(),
        train_name: format!("Train {number}"),
        stops: codes
            .iter()
            .zip(km)
            .enumerate()
            .map(|(i, (c, k))| ScheduleStop {
                station: (*c).into(),
                stop_index: i,
                day_offset: 0,
                sched_arrival_min: *k as i64,
                sched_departure_min: *k as i64,
                distance_km: *k,
            })
            .collect(),
        known,
    }
}

pub fn catalog_of(trains: Vec<TrainSchedule>) -> NetworkCatalog {
    let mut cat = NetworkCatalog::default();
    for t in trains {
        for s in &t.stops {
            cat.stations
                .insert(s.station.clone(), format!("{} Halt", s.station));
        }
        cat.insert_train(t);
    }
    cat
}

/// A bundle whose forest and ridge both predict `value` everywhere, with the
/// given half-widths at every level.
pub fn constant_bundle(station: &str, scope: BundleScope, value: f64, hw: f64, n: usize) -> StationModelBundle {
    let q = ResidualQuantiles { l68: hw, l95: hw, l99: hw };
    StationModelBundle {
        station: station.into(),
        scope,
        forest: ForestModel {
            trees: vec![RegressionTree {
                n_features: 6,
                nodes: vec![TreeNode::Leaf { value, n_samples: n }],
            }],
            config: ForestConfig { n_trees: 1, ..ForestConfig::default() },
        },
        ridge: RidgeModel {
            weights: vec![0.0; 6],
            intercept: value,
            lambda: 1.0,
        },
        residual_quantiles: IntervalPair { forest: q, ridge: q },
        calibration: CalibrationSource::Own { n_residuals: 10 },
        n_train_samples: n,
    }
}

pub fn empty_registry() -> ModelRegistry {
    let wide = ResidualQuantiles { l68: 50.0, l95: 100.0, l99: 150.0 };
    ModelRegistry {
        schema: FeatureSchema::default(),
        direct: Default::default(),
        shared: Default::default(),
        metadata: TrainingMetadata {
            options: TrainingOptions::default(),
            train_date_range: None,
            n_train_journeys: 0,
            n_validation_journeys: 0,
            demoted_trains: vec![],
            shared_fallback_stops: vec![],
            global_quantiles: IntervalPair::default(),
            widest_quantiles: IntervalPair { forest: wide, ridge: wide },
        },
    }
}

/// Random profiles over a shared pool of stations, with some stops missing.
pub fn random_profiles(seed: u64, n: usize) -> Vec<DelayProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<StationCode> = (0..12).map(|i| StationCode::new(format!("P{i:02}"))).collect();
    (0..n)
        .map(|t| {
            let mut stations = pool.clone();
            stations.shuffle(&mut rng);
            stations.truncate(rng.random_range(2..=12));
            let mean_late_min: Vec<Option<f64>> = stations
                .iter()
                .map(|_| rng.random_bool(0.85).then(|| rng.random_range(0..240) as f64 / 4.0))
                .collect();
            DelayProfile {
                train_number: format!("{}", 10000 + t * 7 % 1000),
                counts: mean_late_min.iter().map(|m| m.map_or(0, |_| 5)).collect(),
                stations,
                mean_late_min,
                range: DateRange::all(),
            }
        })
        .collect()
}
