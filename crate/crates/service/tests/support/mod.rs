//! In-process service fixtures: a demo-trained app, request helpers and
//! the response schemas.
#![allow(dead_code)]

use std::sync::{Arc, OnceLock};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::NaiveDate;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use trainbot_core::dialog::{Assistant, AssistantConfig, FixedClock, PolicyConfig};
use trainbot_core::domain::{DelayObservation, NetworkCatalog};
use trainbot_core::predictor::{train_registry, GateConfig, ModelRegistry, TrainingOptions};
use trainbot_core::synthdata::{generate_scenario, split_dataset, Scenario};
use trainbot_service::api::{app, AppState};
use trainbot_service::sessions::MemorySessionStore;

pub struct DemoData {
    pub catalog: NetworkCatalog,
    pub registry: ModelRegistry,
    pub observations: Vec<DelayObservation>,
}

/// The demo network trained once per test binary.
pub fn demo_data() -> &'static DemoData {
    static DATA: OnceLock<DemoData> = OnceLock::new();
    DATA.get_or_init(|| {
        let data = generate_scenario(Scenario::Demo, 42).unwrap();
        let split = split_dataset(&data.observations, [0.6, 0.2, 0.2], 42).unwrap();
        let registry = train_registry(&data.catalog, &data.observations, &split, &TrainingOptions::default()).unwrap();
        DemoData {
            catalog: data.catalog,
            registry,
            observations: data.observations,
        }
    })
}

pub fn today() -> NaiveDate {
    NaiveDate::from_ymd_opt(2018, 9, 21).unwrap()
}

/// A fresh assistant over the demo data with the clock pinned to [`today`].
pub fn demo_assistant(min_confidence: f64) -> Assistant {
    let d = demo_data();
    let config = AssistantConfig {
        policy: PolicyConfig {
            gate: GateConfig {
                min_confidence,
                ..GateConfig::default()
            },
            ..PolicyConfig::default()
        },
        ..AssistantConfig::default()
    };
    Assistant::new(d.catalog.clone(), d.registry.clone(), d.observations.clone(), config)
        .with_clock(Arc::new(FixedClock(today())))
}

pub fn demo_state(min_confidence: f64) -> AppState {
    AppState::new(demo_assistant(min_confidence), MemorySessionStore::new(Duration::from_secs(1800)))
}

pub fn demo_app() -> Router {
    app(demo_state(0.5))
}

/// Sends one request and returns the status and parsed body.
pub async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes)
        .unwrap_or_else(|e| panic!("{method} {uri}: body is not JSON ({e}): {}", String::from_utf8_lossy(&bytes)));
    (status, value)
}

pub fn schema(name: &str) -> &'static str {
    match name {
        "chat" => include_str!("../../schemas/chat.json"),
        "error" => include_str!("../../schemas/error.json"),
        "health" => include_str!("../../schemas/health.json"),
        "prediction" => include_str!("../../schemas/prediction.json"),
        "route" => include_str!("../../schemas/route.json"),
        "summary" => include_str!("../../schemas/summary.json"),
        "trains" => include_str!("../../schemas/trains.json"),
        other => panic!("no schema {other}"),
    }
}

/// Schema violations of `instance`, one message per error.
pub fn violations(schema_name: &str, instance: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(schema(schema_name)).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    validator
        .iter_errors(instance)
        .map(|e| format!("{schema_name}: {} at {}", e, e.instance_path))
        .collect()
}

pub fn assert_valid(schema_name: &str, instance: &Value) {
    let v = violations(schema_name, instance);
    assert!(v.is_empty(), "{v:#?}\n{instance:#}");
}
