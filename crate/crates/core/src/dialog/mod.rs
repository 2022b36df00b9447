//! Slot-based conversational front end.
//!
//! A turn runs through four stages: [`Nlu::parse`] finds the intent and the
//! train, station and date mentioned; [`resolve_slots`] fills gaps from the
//! session context and defaults (destination station, today); a policy
//! dispatches to the predictor or analytics; and [`Templates::render`] turns
//! the result into text. [`Assistant::step`] runs them all and returns the
//! updated context.
//!
//! Intent rules and response templates are data files under `assets/`.

mod engine;
mod gazetteer;
mod nlu;
mod policy;
mod render;
mod resolve;

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::domain::StationCode;

pub use engine::{Assistant, AssistantConfig};
pub use gazetteer::{Gazetteer, StationMatch};
pub use nlu::{Nlu, NluRule, DEFAULT_RULES};
pub use policy::{execute_policy, Backend, PolicyConfig, PolicyResult, StationEntry};
pub use render::{format_minutes, Templates, DEFAULT_TEMPLATES};
pub use resolve::{resolve_slots, ClarificationRequest, Resolution, ResolvedQuery};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DialogAssetError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("no template {kind:?} for locale {locale:?}")]
    MissingTemplate { kind: String, locale: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Intent {
    QueryDelay,
    QueryDelayFurther,
    FirstDelay,
    AverageDelay,
    Bottleneck,
    SimilarTrains,
    ListStations,
    Greet,
    Help,
    Fallback,
}

impl Intent {
    pub const ALL: [Intent; 10] = [
        Intent::QueryDelay,
        Intent::QueryDelayFurther,
        Intent::FirstDelay,
        Intent::AverageDelay,
        Intent::Bottleneck,
        Intent::SimilarTrains,
        Intent::ListStations,
        Intent::Greet,
        Intent::Help,
        Intent::Fallback,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Intent::QueryDelay => "QUERY_DELAY",
            Intent::QueryDelayFurther => "QUERY_DELAY_FURTHER",
            Intent::FirstDelay => "FIRST_DELAY",
            Intent::AverageDelay => "AVERAGE_DELAY",
            Intent::Bottleneck => "BOTTLENECK",
            Intent::SimilarTrains => "SIMILAR_TRAINS",
            Intent::ListStations => "LIST_STATIONS",
            Intent::Greet => "GREET",
            Intent::Help => "HELP",
            Intent::Fallback => "FALLBACK",
        }
    }

    /// Whether answering needs a train.
    pub fn needs_train(self) -> bool {
        !matches!(self, Intent::Greet | Intent::Help | Intent::Fallback)
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Intent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Intent::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| format!("unknown intent {s:?}"))
    }
}

/// A date as the user said it; relative forms are resolved against a clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateExpr {
    On(NaiveDate),
    Today,
    Tomorrow,
    /// The next such weekday, today included.
    Next(chrono::Weekday),
}

impl DateExpr {
    pub fn resolve(self, today: NaiveDate) -> NaiveDate {
        match self {
            DateExpr::On(d) => d,
            DateExpr::Today => today,
            DateExpr::Tomorrow => today.succ_opt().unwrap_or(today),
            DateExpr::Next(w) => {
                let ahead = (7 + w.num_days_from_monday() - today.weekday().num_days_from_monday()) % 7;
                today + chrono::Days::new(ahead as u64)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Train,
    Station,
    Date,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotSet {
    pub train_number: Option<String>,
    /// Only set when the gazetteer recognised the mention.
    pub station: Option<StationCode>,
    /// The station as the user wrote it.
    pub station_mention: Option<String>,
    pub date: Option<DateExpr>,
    pub is_correction: bool,
}

impl SlotSet {
    pub fn is_empty(&self) -> bool {
        self.train_number.is_none() && self.station.is_none() && self.date.is_none()
    }

    /// The slot kind a correction most plausibly targets.
    pub fn last_kind(&self) -> Option<SlotKind> {
        if self.station.is_some() {
            Some(SlotKind::Station)
        } else if self.date.is_some() {
            Some(SlotKind::Date)
        } else if self.train_number.is_some() {
            Some(SlotKind::Train)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedUtterance {
    pub intent: Intent,
    pub slots: SlotSet,
    /// The turn leans on the previous one ("how about ...", a bare slot, a
    /// correction) and should inherit its intent.
    pub follow_up: bool,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogContext {
    pub session_id: String,
    pub last_intent: Option<Intent>,
    pub last_train: Option<String>,
    pub last_station: Option<StationCode>,
    pub last_date: Option<NaiveDate>,
    pub turn_count: u64,
    pub last_offered_station_list: Option<Vec<StationCode>>,
    pub last_supplied: Option<SlotKind>,
}

impl DialogContext {
    pub fn new(session_id: impl Into<String>) -> Self {
        DialogContext {
            session_id: session_id.into(),
            ..DialogContext::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotResponse {
    pub text: String,
    pub intent: Intent,
    /// Structured result behind the text.
    pub payload: PolicyResult,
    pub needs_clarification: bool,
}

/// Source of "today" for date defaults.
pub trait Clock: Send + Sync {
    fn today(&self) -> NaiveDate;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn today(&self) -> NaiveDate {
        chrono::Local::now().date_naive()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub NaiveDate);

impl Clock for FixedClock {
    fn today(&self) -> NaiveDate {
        self.0
    }
}
