use std::sync::LazyLock;

use chrono::{NaiveDate, Weekday};
use regex::{Regex, RegexBuilder};

use super::gazetteer::Gazetteer;
use super::{DateExpr, DialogAssetError, Intent, ParsedUtterance, SlotSet};

/// The bundled intent rules.
pub const DEFAULT_RULES: &str = include_str!("../../assets/nlu_rules.txt");

const CORRECTION: &str = "CORRECTION";
const FOLLOW_UP: &str = "FOLLOW_UP";

static TRAIN_NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|[^\d-])(\d{5})(?:$|[^\d-])").unwrap());
static ISO_DATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d{4}-\d{2}-\d{2})\b").unwrap());
static RELATIVE_DATE: LazyLock<Regex> = LazyLock::new(|| {
    RegexBuilder::new(
        r"\b(today|tonight|tomorrow|monday|tuesday|wednesday|thursday|friday|saturday|sunday|mon|tue|tues|wed|thu|thur|thurs|fri|sat|sun)\b",
    )
    .case_insensitive(true)
    .build()
    .unwrap()
});

#[derive(Debug, Clone)]
pub struct NluRule {
    /// An intent name, or one of the CORRECTION / FOLLOW_UP markers.
    pub label: String,
    pub priority: i32,
    pub pattern: Regex,
}

/// Rule-based intent detection and slot extraction.
#[derive(Debug, Clone)]
pub struct Nlu {
    rules: Vec<NluRule>,
    gazetteer: Gazetteer,
}

impl Nlu {
    pub fn new(rules_text: &str, gazetteer: Gazetteer) -> Result<Self, DialogAssetError> {
        let mut rules = Vec::new();
        for (i, line) in rules_text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |message: String| DialogAssetError::Malformed { line: i + 1, message };
            let mut parts = line.splitn(3, '|').map(str::trim);
            let (Some(label), Some(priority), Some(pattern)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(malformed("expected INTENT | priority | pattern".into()));
            };
            if label != CORRECTION && label != FOLLOW_UP {
                label.parse::<Intent>().map_err(malformed)?;
            }
            let priority = priority
                .parse()
                .map_err(|_| malformed(format!("bad priority {priority:?}")))?;
            let pattern = RegexBuilder::new(pattern)
                .case_insensitive(true)
                .build()
                .map_err(|e| malformed(e.to_string()))?;
            rules.push(NluRule {
                label: label.to_string(),
                priority,
                pattern,
            });
        }
        Ok(Nlu { rules, gazetteer })
    }

    pub fn with_default_rules(gazetteer: Gazetteer) -> Self {
        Nlu::new(DEFAULT_RULES, gazetteer).expect("bundled rules parse")
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    pub fn rules(&self) -> &[NluRule] {
        &self.rules
    }

    /// Never fails: text nothing matches parses as FALLBACK with confidence 0.
    pub fn parse(&self, text: &str) -> ParsedUtterance {
        let mut slots = SlotSet {
            train_number: TRAIN_NUMBER.captures(text).map(|c| c[1].to_string()),
            date: extract_date(text),
            ..SlotSet::default()
        };
        if let Some(m) = self.gazetteer.find(text) {
            slots.station = Some(m.code);
            slots.station_mention = Some(m.mention);
        }

        let mut best: Option<(i32, Intent)> = None;
        let mut follow_up = false;
        for rule in &self.rules {
            if !rule.pattern.is_match(text) {
                continue;
            }
            match rule.label.as_str() {
                CORRECTION => slots.is_correction = true,
                FOLLOW_UP => follow_up = true,
                label => {
                    let intent: Intent = label.parse().expect("validated on load");
                    if best.is_none_or(|(p, _)| rule.priority > p) {
                        best = Some((rule.priority, intent));
                    }
                }
            }
        }

        let has_slots = !slots.is_empty();
        match best {
            Some((_, intent)) => ParsedUtterance {
                intent,
                follow_up: slots.is_correction,
                confidence: if has_slots || !intent.needs_train() { 1.0 } else { 0.8 },
                slots,
            },
            None if follow_up || slots.is_correction || has_slots => ParsedUtterance {
                intent: Intent::QueryDelay,
                follow_up: true,
                confidence: if follow_up || slots.is_correction { 0.6 } else { 0.5 },
                slots,
            },
            None => ParsedUtterance {
                intent: Intent::Fallback,
                slots,
                follow_up: false,
                confidence: 0.0,
            },
        }
    }
}

fn extract_date(text: &str) -> Option<DateExpr> {
    if let Some(d) = ISO_DATE
        .captures(text)
        .and_then(|c| NaiveDate::parse_from_str(&c[1], "%Y-%m-%d").ok())
    {
        return Some(DateExpr::On(d));
    }
    let word = RELATIVE_DATE.captures(text)?[1].to_lowercase();
    Some(match word.as_str() {
        "today" | "tonight" => DateExpr::Today,
        "tomorrow" => DateExpr::Tomorrow,
        w => DateExpr::Next(w[..3].parse::<Weekday>().ok()?),
    })
}
