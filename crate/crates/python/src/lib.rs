//! Python bindings: datasets, trained registries, journey prediction,
//! route analytics and the chat assistant.
//!
//! Structured results cross the boundary as plain dicts and lists built from
//! the same JSON the HTTP service returns.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::sync::Mutex;

use chrono::NaiveDate;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

use trainbot_core::analytics::{route_summary, AnalyticsConfig, DateRange};
use trainbot_core::dialog::{self, AssistantConfig, DialogContext, FixedClock};
use trainbot_core::domain::{
    read_delays, read_schedules, write_delays, write_schedules, DatasetSplit, DelayObservation,
    JourneyKey, NetworkCatalog, StationCode,
};
use trainbot_core::predictor::{
    evaluate_ci_accuracy, load_registry, predict_journey, save_registry, train_registry, CiLevel,
    ModelKind, ModelRegistry, PredictionRequest, TrainingOptions,
};
use trainbot_core::synthdata::{generate_scenario, split_dataset, Scenario};

create_exception!(trainbot, TrainbotError, PyException, "Raised with `(code, message)`.");

const SPLIT_RATIOS: [f64; 3] = [0.6, 0.2, 0.2];

fn fail(code: &str, message: impl ToString) -> PyErr {
    TrainbotError::new_err((code.to_string(), message.to_string()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| fail("internal", e))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_date(text: &str) -> PyResult<NaiveDate> {
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .map_err(|_| fail("bad-request", format!("date {text:?} is not YYYY-MM-DD")))
}

fn parse_ci(percent: u32) -> PyResult<CiLevel> {
    CiLevel::try_from(percent).map_err(|e| fail(e.code(), e))
}

fn parse_model(name: &str) -> PyResult<ModelKind> {
    name.parse().map_err(|e| fail("bad-request", e))
}

/// Schedules and delay history with a deterministic train/validation/test split.
#[pyclass(frozen, module = "trainbot")]
struct Dataset {
    catalog: NetworkCatalog,
    observations: Vec<DelayObservation>,
    split: DatasetSplit,
}

impl Dataset {
    fn new(catalog: NetworkCatalog, observations: Vec<DelayObservation>, seed: u64) -> PyResult<Self> {
        let split = split_dataset(&observations, SPLIT_RATIOS, seed).map_err(|e| fail("bad-data", e))?;
        Ok(Dataset { catalog, observations, split })
    }

    fn known_test_keys(&self) -> BTreeSet<JourneyKey> {
        self.split
            .test
            .iter()
            .filter(|k| self.catalog.train(&k.train_number).is_some_and(|t| t.known))
            .cloned()
            .collect()
    }
}

#[pymethods]
impl Dataset {
    /// Generates a named synthetic scenario (`smooth`, `bottlenecked`, `messy`, `demo`).
    #[staticmethod]
    #[pyo3(signature = (scenario = "smooth", seed = 42))]
    fn generate(py: Python<'_>, scenario: &str, seed: u64) -> PyResult<Self> {
        let scenario: Scenario = scenario.parse().map_err(|e| fail("bad-request", e))?;
        let data = py
            .detach(|| generate_scenario(scenario, seed))
            .map_err(|e| fail("bad-request", e))?;
        Dataset::new(data.catalog, data.observations, seed)
    }

    /// Reads `schedules.csv` and `delays.csv` from a directory.
    #[staticmethod]
    #[pyo3(signature = (directory, seed = 42))]
    fn load(directory: PathBuf, seed: u64) -> PyResult<Self> {
        let open = |name: &str| {
            File::open(directory.join(name))
                .map(BufReader::new)
                .map_err(|e| fail("io", format!("{}: {e}", directory.join(name).display())))
        };
        let catalog = read_schedules(open("schedules.csv")?).map_err(|e| fail("bad-data", e))?;
        let observations = read_delays(open("delays.csv")?).map_err(|e| fail("bad-data", e))?;
        Dataset::new(catalog, observations, seed)
    }

    /// Writes `schedules.csv` and `delays.csv` into a directory.
    fn write(&self, directory: PathBuf) -> PyResult<()> {
        fs::create_dir_all(&directory).map_err(|e| fail("io", e))?;
        let create = |name: &str| {
            File::create(directory.join(name))
                .map(BufWriter::new)
                .map_err(|e| fail("io", format!("{}: {e}", directory.join(name).display())))
        };
        write_schedules(&self.catalog, create("schedules.csv")?).map_err(|e| fail("io", e))?;
        write_delays(&self.observations, create("delays.csv")?).map_err(|e| fail("io", e))?;
        Ok(())
    }

    #[getter]
    fn train_numbers(&self) -> Vec<String> {
        self.catalog.trains.keys().cloned().collect()
    }

    #[getter]
    fn n_observations(&self) -> usize {
        self.observations.len()
    }

    /// The schedule of one train as a dict.
    fn route<'py>(&self, py: Python<'py>, train: &str) -> PyResult<Bound<'py, PyAny>> {
        let schedule = self
            .catalog
            .train(train)
            .ok_or_else(|| fail("unknown-train", format!("train {train} is not in the catalog")))?;
        to_py(py, schedule)
    }

    /// Per-station delay profile, bottleneck and destination statistics.
    #[pyo3(signature = (train, date_from = None, date_to = None))]
    fn summary<'py>(
        &self,
        py: Python<'py>,
        train: &str,
        date_from: Option<&str>,
        date_to: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let range = DateRange {
            from: date_from.map(parse_date).transpose()?,
            to: date_to.map(parse_date).transpose()?,
        };
        let summary = route_summary(&self.catalog, &self.observations, train, range, &AnalyticsConfig::default())
            .map_err(|e| fail(e.code(), e))?;
        to_py(py, &summary)
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} trains, {} observations)",
            self.catalog.trains.len(),
            self.observations.len()
        )
    }
}

/// Trained per-station models for one dataset.
#[pyclass(frozen, module = "trainbot")]
struct Registry {
    inner: ModelRegistry,
}

#[pymethods]
impl Registry {
    /// Fits every bundle on the dataset's training split.
    #[staticmethod]
    #[pyo3(signature = (dataset, n_trees = 50, seed = 42))]
    fn train(py: Python<'_>, dataset: &Dataset, n_trees: usize, seed: u64) -> PyResult<Self> {
        let mut options = TrainingOptions::default();
        options.forest.n_trees = n_trees;
        options.forest.seed = seed;
        let inner = py
            .detach(|| train_registry(&dataset.catalog, &dataset.observations, &dataset.split, &options))
            .map_err(|e| fail(e.code(), e))?;
        Ok(Registry { inner })
    }

    #[staticmethod]
    fn load(py: Python<'_>, path: PathBuf) -> PyResult<Self> {
        let inner = py.detach(|| load_registry(&path)).map_err(|e| fail(e.code(), e))?;
        Ok(Registry { inner })
    }

    fn save(&self, py: Python<'_>, path: PathBuf) -> PyResult<()> {
        py.detach(|| save_registry(&self.inner, &path)).map_err(|e| fail(e.code(), e))
    }

    #[getter]
    fn n_bundles(&self) -> usize {
        self.inner.n_bundles()
    }

    /// Chained per-stop prediction for one journey.
    #[pyo3(signature = (dataset, train, date, station = None, ci = 99, model = "forest"))]
    fn predict<'py>(
        &self,
        py: Python<'py>,
        dataset: &Dataset,
        train: &str,
        date: &str,
        station: Option<&str>,
        ci: u32,
        model: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let request = PredictionRequest {
            station: station.map(StationCode::new),
            ci_level: parse_ci(ci)?,
            model_kind: parse_model(model)?,
            ..PredictionRequest::new(train, parse_date(date)?)
        };
        let prediction =
            predict_journey(&self.inner, &dataset.catalog, &request).map_err(|e| fail(e.code(), e))?;
        to_py(py, &prediction)
    }

    /// Interval coverage and point error on the known-train test journeys.
    #[pyo3(signature = (dataset, ci = 99, model = "forest"))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        dataset: &Dataset,
        ci: u32,
        model: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let (ci, model) = (parse_ci(ci)?, parse_model(model)?);
        let keys = dataset.known_test_keys();
        let report = py
            .detach(|| evaluate_ci_accuracy(&self.inner, &dataset.catalog, &dataset.observations, &keys, ci, model))
            .map_err(|e| fail(e.code(), e))?;
        to_py(py, &report)
    }
}

/// The chat assistant; keeps one dialog context per session id.
#[pyclass(frozen, module = "trainbot")]
struct Assistant {
    inner: dialog::Assistant,
    sessions: Mutex<HashMap<String, DialogContext>>,
}

#[pymethods]
impl Assistant {
    /// `today` pins the date used for "today"/"tomorrow" defaults.
    #[new]
    #[pyo3(signature = (dataset, registry, today = None))]
    fn new(dataset: &Dataset, registry: &Registry, today: Option<&str>) -> PyResult<Self> {
        let mut inner = dialog::Assistant::new(
            dataset.catalog.clone(),
            registry.inner.clone(),
            dataset.observations.clone(),
            AssistantConfig::default(),
        );
        if let Some(today) = today {
            inner = inner.with_clock(std::sync::Arc::new(FixedClock(parse_date(today)?)));
        }
        Ok(Assistant {
            inner,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    /// One turn. Returns `reply_text`, `intent`, `payload`,
    /// `needs_clarification` and `turn`.
    #[pyo3(signature = (text, session = "default"))]
    fn chat<'py>(&self, py: Python<'py>, text: &str, session: &str) -> PyResult<Bound<'py, PyAny>> {
        let context = {
            let sessions = self.sessions.lock().map_err(|_| fail("internal", "session lock poisoned"))?;
            sessions.get(session).cloned().unwrap_or_else(|| DialogContext::new(session))
        };
        let (response, next) = py.detach(|| self.inner.step(&context, text));
        let turn = next.turn_count;
        self.sessions
            .lock()
            .map_err(|_| fail("internal", "session lock poisoned"))?
            .insert(session.to_string(), next);
        let reply = serde_json::json!({
            "session_id": session,
            "reply_text": response.text,
            "intent": response.intent,
            "payload": response.payload,
            "needs_clarification": response.needs_clarification,
            "turn": turn,
        });
        to_py(py, &reply)
    }

    /// Forgets a session's dialog context.
    #[pyo3(signature = (session = "default"))]
    fn reset(&self, session: &str) -> PyResult<()> {
        self.sessions
            .lock()
            .map_err(|_| fail("internal", "session lock poisoned"))?
            .remove(session);
        Ok(())
    }
}

#[pymodule]
fn trainbot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Registry>()?;
    m.add_class::<Assistant>()?;
    m.add("TrainbotError", m.py().get_type::<TrainbotError>())?;
    Ok(())
}
