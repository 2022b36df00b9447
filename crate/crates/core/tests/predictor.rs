mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::fixtures::*;
use common::oracles::nearest_rank_percentile;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use trainbot_core::domain::{DelayObservation, JourneyKey, StationCode};
use trainbot_core::mlcore::forest_predict;
use trainbot_core::predictor::*;
use trainbot_core::synthdata::{split_dataset, GeneratorConfig};

fn three_stop_history(f: impl Fn(usize, usize) -> f64) -> (trainbot_core::domain::NetworkCatalog, Vec<DelayObservation>) {
    let cat = catalog_of(vec![straight_route("11111", &["AAA", "BBB", "CCC"], &[0.0, 60.0, 150.0], true)]);
    let start = date(2017, 1, 1);
    let obs = (0..100)
        .flat_map(|d| {
            let day = start + chrono::Days::new(d as u64);
            let f = &f;
            ["AAA", "BBB", "CCC"]
                .into_iter()
                .enumerate()
                .map(move |(i, s)| DelayObservation::new("11111", day, s.into(), f(d, i)))
        })
        .collect();
    (cat, obs)
}

#[test]
fn one_known_train_gets_one_bundle_per_stop() {
    let (cat, obs) = three_stop_history(|d, i| (d % 7) as f64 * i as f64);
    let split = split_dataset(&obs, [0.6, 0.2, 0.2], 1).unwrap();
    let reg = train_registry(&cat, &obs, &split, &small_options()).unwrap();
    assert_eq!(reg.direct["11111"].len(), 3);
    assert_eq!(reg.shared.len(), 3);
    assert!(reg.metadata.demoted_trains.is_empty());
}

#[test]
fn chained_prediction_matches_a_hand_rolled_chain() {
    let (cat, obs) = three_stop_history(|d, i| ((d * 13 + i * 5) % 11) as f64 * (i + 1) as f64);
    let split = split_dataset(&obs, [0.6, 0.2, 0.2], 1).unwrap();
    let reg = train_registry(&cat, &obs, &split, &small_options()).unwrap();
    let schedule = cat.train("11111").unwrap();
    let day = date(2018, 3, 14);
    let p = predict_journey(&reg, &cat, &PredictionRequest::new("11111", day)).unwrap();

    let mut prev = 0.0;
    for (i, stop) in schedule.stops.iter().enumerate() {
        let bundle = &reg.direct["11111"][&stop.station];
        let x = [
            3.0,
            2.0,
            i as f64,
            stop.distance_km,
            stop.sched_arrival_min as f64,
            if i == 0 { 0.0 } else { prev },
        ];
        let want = forest_predict(&bundle.forest, &x).unwrap().max(-30.0);
        assert_eq!(p.stops[i].expected_late_min, want, "stop {i}");
        assert_eq!(p.stops[i].source, PredictionSource::Direct);
        prev = want;
    }
}

#[test]
fn all_zero_history_predicts_zero_with_zero_width() {
    let (cat, obs) = three_stop_history(|_, _| 0.0);
    let split = split_dataset(&obs, [0.6, 0.2, 0.2], 1).unwrap();
    let reg = train_registry(&cat, &obs, &split, &small_options()).unwrap();
    for level in CiLevel::ALL {
        for kind in [ModelKind::Forest, ModelKind::Ridge] {
            let req = PredictionRequest {
                ci_level: level,
                model_kind: kind,
                ..PredictionRequest::new("11111", date(2018, 1, 5))
            };
            let p = predict_journey(&reg, &cat, &req).unwrap();
            assert_eq!(p.confidence, 1.0);
            for s in &p.stops {
                assert_eq!((s.expected_late_min, s.interval_low, s.interval_high), (0.0, 0.0, 0.0));
            }
        }
    }
}

#[test]
fn demoted_known_train_is_served_as_unknown() {
    let (cat, obs) = three_stop_history(|d, _| d as f64 % 5.0);
    let split = split_dataset(&obs, [0.2, 0.4, 0.4], 1).unwrap();
    // 20 training journeys: the only known train is demoted, so nothing is
    // left to pool and every stop falls back.
    let reg = train_registry(&cat, &obs, &split, &small_options()).unwrap();
    assert_eq!(reg.metadata.demoted_trains, vec!["11111".to_string()]);
    assert!(reg.direct.is_empty() && reg.shared.is_empty());
    let p = predict_journey(&reg, &cat, &PredictionRequest::new("11111", date(2018, 1, 1))).unwrap();
    assert!(p.stops.iter().all(|s| s.source == PredictionSource::Fallback));
    assert_eq!(p.confidence, 0.0);
}

#[test]
fn empty_training_split_is_fatal() {
    let (cat, obs) = three_stop_history(|_, _| 1.0);
    let split = split_dataset(&obs, [0.0, 0.5, 0.5], 1).unwrap();
    assert!(matches!(
        train_registry(&cat, &obs, &split, &small_options()),
        Err(PredictError::EmptyTrainingSplit)
    ));
}

#[test]
fn half_widths_match_sorted_index_quantiles_on_normal_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let normal = Normal::new(0.0, 10.0).unwrap();
    let residuals: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
    let q = calibrate_intervals(&residuals, 10).unwrap();
    let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    assert_eq!(q.l68, nearest_rank_percentile(&abs, 68));
    assert_eq!(q.l95, nearest_rank_percentile(&abs, 95));
    assert_eq!(q.l99, nearest_rank_percentile(&abs, 99));
    assert!((q.l68 - 10.0).abs() <= 0.5, "{}", q.l68);
    // |N(0, 10)| has its 68th percentile at 10 * z(0.84).
    use statrs::distribution::{ContinuousCDF, Normal as StdNormal};
    let z = StdNormal::new(0.0, 1.0).unwrap().inverse_cdf(0.84);
    assert!((q.l68 - 10.0 * z).abs() < 0.4);
}

#[test]
fn shared_and_interpolated_stops_for_an_unknown_train() {
    let mut reg = empty_registry();
    reg.shared.insert("AAA".into(), constant_bundle("AAA", BundleScope::SharedStation, 10.0, 2.0, 100));
    reg.shared.insert("CCC".into(), constant_bundle("CCC", BundleScope::SharedStation, 30.0, 6.0, 100));
    let cat = catalog_of(vec![straight_route("22222", &["AAA", "BBB", "CCC", "DDD"], &[0.0, 40.0, 80.0, 90.0], false)]);
    let schedule = cat.train("22222").unwrap();
    assert!(matches!(generalize_unknown(&reg, schedule, 0), BundleChoice::Shared(_)));
    assert!(matches!(
        generalize_unknown(&reg, schedule, 1),
        BundleChoice::Interpolated { before: Some(0), after: Some(2), .. }
    ));
    let p = predict_journey(&reg, &cat, &PredictionRequest::new("22222", date(2018, 9, 21))).unwrap();
    let sources: Vec<_> = p.stops.iter().map(|s| s.source).collect();
    assert_eq!(
        sources,
        [PredictionSource::Shared, PredictionSource::Interpolated, PredictionSource::Shared, PredictionSource::Interpolated]
    );
    assert_eq!(p.stops[1].expected_late_min, 20.0);
    assert_eq!(p.stops[1].interval_high - p.stops[1].expected_late_min, 4.0);
    assert_eq!(p.stops[3].expected_late_min, 30.0);
    assert_eq!(p.confidence, (1.0 + 0.5 + 1.0 + 0.5) / 4.0);
}

#[test]
fn route_without_shared_stations_falls_back_and_is_refused() {
    let reg = empty_registry();
    let cat = catalog_of(vec![straight_route("33333", &["XXA", "XXB"], &[0.0, 10.0], false)]);
    let p = predict_journey(&reg, &cat, &PredictionRequest::new("33333", date(2018, 1, 1))).unwrap();
    for s in &p.stops {
        assert_eq!(s.source, PredictionSource::Fallback);
        assert_eq!(s.expected_late_min, 0.0);
        assert_eq!(s.interval_high, 150.0);
    }
    assert_eq!(p.confidence, 0.0);
    assert!(matches!(
        gate_response(&p, &GateConfig::default()),
        GateDecision::Refuse(RefusalReason::LowConfidence { .. })
    ));
}

#[test]
fn gate_thresholds() {
    let mut reg = empty_registry();
    reg.shared.insert("XXA".into(), constant_bundle("XXA", BundleScope::SharedStation, 1.0, 1.0, 5));
    reg.shared.insert("XXB".into(), constant_bundle("XXB", BundleScope::SharedStation, 1.0, 1.0, 5));
    let cat = catalog_of(vec![straight_route("33333", &["XXA", "XXB"], &[0.0, 10.0], false)]);
    let mut p = predict_journey(&reg, &cat, &PredictionRequest::new("33333", date(2018, 1, 1))).unwrap();
    p.elapsed_prediction_ms = 5.0;
    let cfg = GateConfig { min_confidence: 0.5, timeout_ms: 10_000.0 };
    assert_eq!(gate_response(&p, &cfg), GateDecision::Answer);
    p.elapsed_prediction_ms = 20_000.0;
    assert!(matches!(gate_response(&p, &cfg), GateDecision::Refuse(RefusalReason::Timeout { .. })));
    p.confidence = 0.1;
    let GateDecision::Refuse(reason) = gate_response(&p, &cfg) else { panic!() };
    assert_eq!(reason.code(), "low-confidence");
}

#[test]
fn request_errors() {
    let w = small_world();
    let err = predict_journey(&w.registry, &w.data.catalog, &PredictionRequest::new("99999", date(2018, 1, 1)))
        .unwrap_err();
    assert_eq!(err.code(), "unknown-train");
    let train = w.data.catalog.known_trains().next().unwrap();
    let req = PredictionRequest {
        station: Some(StationCode::from("NOPE")),
        ..PredictionRequest::new(train.train_number.clone(), date(2018, 1, 1))
    };
    match predict_journey(&w.registry, &w.data.catalog, &req).unwrap_err() {
        PredictError::StationNotOnRoute { route, .. } => assert_eq!(route, train.station_codes()),
        other => panic!("{other}"),
    }
    let origin = PredictionRequest {
        station: Some(train.origin().station.clone()),
        ..PredictionRequest::new(train.train_number.clone(), date(2018, 1, 1))
    };
    let p = predict_journey(&w.registry, &w.data.catalog, &origin).unwrap();
    assert_eq!(p.requested_stop, Some(0));
}

#[test]
fn sources_follow_train_membership() {
    let w = small_world();
    for t in w.data.catalog.trains.values() {
        let p = predict_journey(&w.registry, &w.data.catalog, &PredictionRequest::new(t.train_number.clone(), date(2018, 2, 2)))
            .unwrap();
        assert_eq!(p.stops.len(), t.stops.len());
        for s in &p.stops {
            if t.known {
                assert_eq!(s.source, PredictionSource::Direct);
            } else {
                assert_ne!(s.source, PredictionSource::Direct);
            }
            assert!(s.interval_low <= s.expected_late_min && s.expected_late_min <= s.interval_high);
            assert!(s.expected_late_min >= -30.0);
        }
    }
}

#[test]
fn held_out_error_is_close_to_the_generator_noise() {
    let w = small_world();
    let known: BTreeSet<JourneyKey> = w
        .split
        .test
        .iter()
        .filter(|k| w.registry.is_modelled(&k.train_number))
        .cloned()
        .collect();
    let r = evaluate_ci_accuracy(&w.registry, &w.data.catalog, &w.data.observations, &known, CiLevel::L95, ModelKind::Forest)
        .unwrap();
    let sigma = w.data.config.noise_sigma;
    assert!(r.rmse <= 1.5 * sigma, "rmse {} vs sigma {sigma}", r.rmse);
}

#[test]
fn coverage_extremes() {
    let mut reg = empty_registry();
    reg.shared.insert("AAA".into(), constant_bundle("AAA", BundleScope::SharedStation, 5.0, 0.0, 50));
    reg.shared.insert("BBB".into(), constant_bundle("BBB", BundleScope::SharedStation, 5.0, 0.0, 50));
    let cat = catalog_of(vec![straight_route("44444", &["AAA", "BBB"], &[0.0, 10.0], false)]);
    let day = date(2018, 1, 1);
    let obs = vec![
        DelayObservation::new("44444", day, "AAA".into(), 7.0),
        DelayObservation::new("44444", day, "BBB".into(), 2.0),
    ];
    let keys = BTreeSet::from([JourneyKey::new("44444", day)]);
    let r = evaluate_ci_accuracy(&reg, &cat, &obs, &keys, CiLevel::L99, ModelKind::Forest).unwrap();
    assert_eq!(r.coverage, 0.0);
    for b in reg.shared.values_mut() {
        let inf = ResidualQuantiles { l68: f64::INFINITY, l95: f64::INFINITY, l99: f64::INFINITY };
        b.residual_quantiles = IntervalPair { forest: inf, ridge: inf };
    }
    let r = evaluate_ci_accuracy(&reg, &cat, &obs, &keys, CiLevel::L68, ModelKind::Forest).unwrap();
    assert_eq!(r.coverage, 1.0);
    assert!(evaluate_ci_accuracy(&reg, &cat, &obs, &BTreeSet::new(), CiLevel::L68, ModelKind::Forest).is_err());
}

#[test]
fn coverage_is_monotone_in_level() {
    let w = small_world();
    let mut last = 0.0;
    for level in CiLevel::ALL {
        let r = evaluate_ci_accuracy(&w.registry, &w.data.catalog, &w.data.observations, &w.split.test, level, ModelKind::Forest)
            .unwrap();
        assert!(r.coverage >= last);
        last = r.coverage;
    }
}

#[test]
fn registry_round_trip_preserves_predictions_bit_for_bit() {
    let w = small_world();
    let text = write_registry(&w.registry).unwrap();
    let back = read_registry(&text).unwrap();
    assert_eq!(back, w.registry);
    let trains: Vec<&String> = w.data.catalog.trains.keys().collect();
    for probe in 0..100u64 {
        let req = PredictionRequest {
            ci_level: CiLevel::ALL[probe as usize % 3],
            model_kind: if probe % 2 == 0 { ModelKind::Forest } else { ModelKind::Ridge },
            ..PredictionRequest::new(trains[probe as usize % trains.len()].clone(), date(2018, 1, 1) + chrono::Days::new(probe * 3))
        };
        let a = predict_journey(&w.registry, &w.data.catalog, &req).unwrap();
        let b = predict_journey(&back, &w.data.catalog, &req).unwrap();
        for (x, y) in a.stops.iter().zip(&b.stops) {
            assert_eq!(x.expected_late_min.to_bits(), y.expected_late_min.to_bits());
            assert_eq!(x.interval_low.to_bits(), y.interval_low.to_bits());
            assert_eq!(x.interval_high.to_bits(), y.interval_high.to_bits());
        }
    }
}

#[test]
fn damaged_bundles_are_rejected() {
    let w = small_world();
    let text = write_registry(&w.registry).unwrap();
    let truncated = &text[..text.len() / 2];
    assert_eq!(read_registry(truncated).unwrap_err().code(), "corrupt-bundle");

    let tampered = text.replacen("\"n_train_samples\":", "\"n_train_samples\":1", 1);
    assert_eq!(read_registry(&tampered).unwrap_err().code(), "corrupt-bundle");

    for v in ["\"2\"", "2"] {
        let bumped = text.replacen("\"format_version\":1", &format!("\"format_version\":{v}"), 1);
        assert_ne!(bumped, text);
        assert_eq!(read_registry(&bumped).unwrap_err().code(), "unsupported-version");
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bundle");
    save_registry(&w.registry, &path).unwrap();
    assert_eq!(load_registry(&path).unwrap(), w.registry);
}

#[test]
fn fixed_seed_training_is_reproducible() {
    let cfg = GeneratorConfig { n_known_trains: 2, n_unknown_trains: 1, ..small_config(3) };
    let a = build_world(&cfg, &small_options());
    let b = build_world(&cfg, &small_options());
    assert_eq!(write_registry(&a.registry).unwrap(), write_registry(&b.registry).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wider_levels_give_wider_intervals(train in 0usize..12, day in 0u64..365, ridge in any::<bool>()) {
        let w = small_world();
        let number = w.data.catalog.trains.keys().nth(train).unwrap().clone();
        let kind = if ridge { ModelKind::Ridge } else { ModelKind::Forest };
        let widths: Vec<Vec<f64>> = CiLevel::ALL
            .iter()
            .map(|&level| {
                let req = PredictionRequest {
                    ci_level: level,
                    model_kind: kind,
                    ..PredictionRequest::new(number.clone(), date(2018, 1, 1) + chrono::Days::new(day))
                };
                let p = predict_journey(&w.registry, &w.data.catalog, &req).unwrap();
                p.stops.iter().map(|s| s.interval_high - s.expected_late_min).collect()
            })
            .collect();
        for i in 0..widths[0].len() {
            prop_assert!(widths[0][i] <= widths[1][i] && widths[1][i] <= widths[2][i]);
        }
    }

    #[test]
    fn later_stops_never_affect_earlier_predictions(
        train in 0usize..6,
        cut in 0usize..8,
        stretch in 1.0f64..3.0,
        day in 0u64..365,
    ) {
        let w = small_world();
        let schedule = w.data.catalog.known_trains().nth(train).unwrap().clone();
        let cut = cut.min(schedule.stops.len() - 2);
        let mut altered = schedule.clone();
        for s in altered.stops.iter_mut().skip(cut + 1) {
            s.distance_km *= stretch;
            s.sched_arrival_min = (s.sched_arrival_min as f64 * stretch) as i64;
            s.sched_departure_min = s.sched_arrival_min + 3;
        }
        let mut cat = w.data.catalog.clone();
        cat.insert_train(altered);
        let req = PredictionRequest::new(schedule.train_number.clone(), date(2018, 1, 1) + chrono::Days::new(day));
        let a = predict_journey(&w.registry, &w.data.catalog, &req).unwrap();
        let b = predict_journey(&w.registry, &cat, &req).unwrap();
        for i in 0..=cut {
            prop_assert_eq!(a.stops[i].expected_late_min, b.stops[i].expected_late_min);
            prop_assert_eq!(a.stops[i].interval_high, b.stops[i].interval_high);
        }
    }

    #[test]
    fn identical_requests_give_identical_predictions(train in 0usize..12, day in 0u64..365) {
        let w = small_world();
        let number = w.data.catalog.trains.keys().nth(train).unwrap().clone();
        let req = PredictionRequest::new(number, date(2018, 1, 1) + chrono::Days::new(day));
        let mut a = predict_journey(&w.registry, &w.data.catalog, &req).unwrap();
        let mut b = predict_journey(&w.registry, &w.data.catalog, &req).unwrap();
        a.elapsed_prediction_ms = 0.0;
        b.elapsed_prediction_ms = 0.0;
        prop_assert_eq!(a, b);
    }
}

#[test]
fn coverage_per_level_is_reported_for_all_journeys() {
    let w = small_world();
    let by_train: BTreeMap<&str, usize> = w.split.test.iter().fold(BTreeMap::new(), |mut m, k| {
        *m.entry(k.train_number.as_str()).or_default() += 1;
        m
    });
    let r = evaluate_ci_accuracy(&w.registry, &w.data.catalog, &w.data.observations, &w.split.test, CiLevel::L99, ModelKind::Forest)
        .unwrap();
    assert_eq!(r.n_journeys, by_train.values().sum::<usize>());
}
