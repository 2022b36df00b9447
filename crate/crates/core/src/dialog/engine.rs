use std::sync::Arc;

use super::gazetteer::Gazetteer;
use super::nlu::Nlu;
use super::policy::{execute_policy, Backend, PolicyConfig, PolicyResult};
use super::render::Templates;
use super::resolve::{resolve_slots, Resolution};
use super::{BotResponse, Clock, DialogAssetError, DialogContext, Intent, SystemClock};
use crate::domain::{DelayObservation, NetworkCatalog};
use crate::predictor::ModelRegistry;

#[derive(Debug, Clone, PartialEq)]
pub struct AssistantConfig {
    pub policy: PolicyConfig,
    pub locale: String,
}

impl Default for AssistantConfig {
    fn default() -> Self {
        AssistantConfig {
            policy: PolicyConfig::default(),
            locale: "en".into(),
        }
    }
}

/// The full turn pipeline over a read-only backend. Shareable across
/// threads; per-session state lives in [`DialogContext`].
pub struct Assistant {
    backend: Backend,
    nlu: Nlu,
    templates: Templates,
    clock: Arc<dyn Clock>,
    config: AssistantConfig,
}

impl Assistant {
    pub fn new(
        catalog: NetworkCatalog,
        registry: ModelRegistry,
        observations: Vec<DelayObservation>,
        config: AssistantConfig,
    ) -> Self {
        let nlu = Nlu::with_default_rules(Gazetteer::from_catalog(&catalog));
        Assistant {
            backend: Backend::new(catalog, registry, observations),
            nlu,
            templates: Templates::bundled(),
            clock: Arc::new(SystemClock),
            config,
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Replaces the bundled rule and template files.
    pub fn with_assets(mut self, rules: &str, templates: &str) -> Result<Self, DialogAssetError> {
        self.nlu = Nlu::new(rules, self.nlu.gazetteer().clone())?;
        self.templates = Templates::parse(templates)?;
        Ok(self)
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn nlu(&self) -> &Nlu {
        &self.nlu
    }

    pub fn config(&self) -> &AssistantConfig {
        &self.config
    }

    pub fn today(&self) -> chrono::NaiveDate {
        self.clock.today()
    }

    /// Runs one turn. Deterministic given the backend, clock, context and
    /// text; never panics on user input.
    pub fn step(&self, context: &DialogContext, utterance: &str) -> (BotResponse, DialogContext) {
        let parsed = self.nlu.parse(utterance);
        let resolution = resolve_slots(&parsed, context, &self.backend.catalog, self.clock.today());
        let mut next = context.clone();
        next.turn_count += 1;
        if let Some(kind) = parsed.slots.last_kind() {
            next.last_supplied = Some(kind);
        }

        let (result, intent) = match resolution {
            Resolution::Clarify(request) => {
                let intent = match &request {
                    super::ClarificationRequest::WhichTrain { intent }
                    | super::ClarificationRequest::WhichStation { intent, .. }
                    | super::ClarificationRequest::WhichDate { intent, .. } => *intent,
                };
                next.last_intent = Some(intent);
                (PolicyResult::Clarification { request }, intent)
            }
            Resolution::Query(query) => {
                let result = execute_policy(&query, &self.backend, &self.config.policy);
                if query.intent.needs_train() {
                    next.last_intent = Some(query.intent);
                }
                let valid_train = query
                    .train_number
                    .as_ref()
                    .filter(|t| self.backend.catalog.train(t).is_some());
                if let Some(train) = valid_train {
                    if next.last_train.as_ref() != Some(train) {
                        next.last_station = None;
                        next.last_offered_station_list = None;
                    }
                    next.last_train = Some(train.clone());
                    next.last_date = Some(query.date);
                    match &result {
                        PolicyResult::StationListOffer { stations, .. } => {
                            next.last_offered_station_list = Some(stations.iter().map(|s| s.code.clone()).collect());
                        }
                        PolicyResult::UnknownTrain { .. } => {}
                        _ => {
                            if let Some(station) = &query.station {
                                next.last_station = Some(station.clone());
                                next.last_offered_station_list = None;
                            }
                        }
                    }
                }
                (result, query.intent)
            }
        };
        let response = self.templates.render(&result, intent, &self.config.locale);
        (response, next)
    }

    /// Runs a whole script in a fresh session.
    pub fn run_script(&self, session_id: &str, turns: &[&str]) -> Vec<(BotResponse, DialogContext)> {
        let mut context = DialogContext::new(session_id);
        let mut out = Vec::with_capacity(turns.len());
        for turn in turns {
            let (response, next) = self.step(&context, turn);
            context = next.clone();
            out.push((response, next));
        }
        out
    }
}

impl std::fmt::Debug for Assistant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Assistant")
            .field("trains", &self.backend.catalog.trains.len())
            .field("observations", &self.backend.n_observations())
            .field("config", &self.config)
            .finish()
    }
}

impl Intent {
    /// Whether the intent produces a journey prediction.
    pub fn predicts(self) -> bool {
        matches!(self, Intent::QueryDelay | Intent::QueryDelayFurther | Intent::FirstDelay)
    }
}
