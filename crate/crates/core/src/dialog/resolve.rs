use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DialogContext, Intent, ParsedUtterance, SlotKind};
use crate::domain::{NetworkCatalog, StationCode};

/// A query with every slot its intent needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedQuery {
    pub intent: Intent,
    pub train_number: Option<String>,
    pub station: Option<StationCode>,
    pub station_mention: Option<String>,
    /// The station came from the route's destination, not the user.
    pub station_defaulted: bool,
    pub date: NaiveDate,
    pub date_defaulted: bool,
    pub is_correction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ask", rename_all = "snake_case")]
pub enum ClarificationRequest {
    WhichTrain { intent: Intent },
    WhichStation { intent: Intent, train_number: String },
    WhichDate { intent: Intent, train_number: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Resolution {
    Query(ResolvedQuery),
    Clarify(ClarificationRequest),
}

/// Fills missing slots from context and defaults.
///
/// * train: the utterance, else the previous turn's train, else ask;
/// * intent: follow-ups and corrections inherit the previous intent;
/// * station: the utterance; follow-ups on the same train inherit the
///   previous station; otherwise the destination where the intent needs one;
/// * date: the utterance; follow-ups inherit the previous date; otherwise
///   today.
pub fn resolve_slots(
    parsed: &ParsedUtterance,
    context: &DialogContext,
    catalog: &NetworkCatalog,
    today: NaiveDate,
) -> Resolution {
    let slots = &parsed.slots;
    let intent = if parsed.follow_up {
        context.last_intent.filter(|i| i.needs_train()).unwrap_or(parsed.intent)
    } else {
        parsed.intent
    };
    if !intent.needs_train() {
        return Resolution::Query(ResolvedQuery {
            intent,
            train_number: None,
            station: None,
            station_mention: None,
            station_defaulted: false,
            date: today,
            date_defaulted: true,
            is_correction: slots.is_correction,
        });
    }

    let Some(train) = slots.train_number.clone().or_else(|| context.last_train.clone()) else {
        return Resolution::Clarify(ClarificationRequest::WhichTrain { intent });
    };
    let same_train = context.last_train.as_deref() == Some(train.as_str());
    let inherit = parsed.follow_up && same_train;

    // A correction that names no slot cannot say what to replace.
    if slots.is_correction && slots.is_empty() {
        return Resolution::Clarify(match context.last_supplied {
            Some(SlotKind::Date) => ClarificationRequest::WhichDate { intent, train_number: train },
            Some(SlotKind::Train) => ClarificationRequest::WhichTrain { intent },
            _ => ClarificationRequest::WhichStation { intent, train_number: train },
        });
    }

    let schedule = catalog.train(&train);
    let mut station_defaulted = false;
    let station = match (&slots.station, intent) {
        (Some(s), _) => Some(s.clone()),
        (None, _) if inherit && context.last_station.is_some() => context.last_station.clone(),
        (None, Intent::QueryDelay | Intent::AverageDelay) => {
            station_defaulted = true;
            schedule.map(|s| s.destination().station.clone())
        }
        (None, Intent::QueryDelayFurther) => {
            return Resolution::Clarify(ClarificationRequest::WhichStation { intent, train_number: train });
        }
        (None, _) => None,
    };

    let (date, date_defaulted) = match (slots.date, context.last_date) {
        (Some(expr), _) => (expr.resolve(today), false),
        (None, Some(d)) if inherit => (d, false),
        (None, _) => (today, true),
    };

    Resolution::Query(ResolvedQuery {
        intent,
        train_number: Some(train),
        station_mention: slots.station_mention.clone().filter(|_| slots.station.is_some()),
        station,
        station_defaulted,
        date,
        date_defaulted,
        is_correction: slots.is_correction,
    })
}
