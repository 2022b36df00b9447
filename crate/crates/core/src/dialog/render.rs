use std::collections::BTreeMap;

use super::policy::{PolicyResult, StationEntry};
use super::resolve::ClarificationRequest;
use super::{BotResponse, DialogAssetError, Intent};
use crate::predictor::RefusalReason;

/// The bundled response templates.
pub const DEFAULT_TEMPLATES: &str = include_str!("../../assets/templates.txt");

const REQUIRED_KINDS: [&str; 25] = [
    "delay",
    "on_time",
    "further_delay",
    "further_recovered",
    "further_unchanged",
    "at_destination",
    "first_delay",
    "no_first_delay",
    "average_delay",
    "bottleneck",
    "similar_trains",
    "no_similar_trains",
    "station_list",
    "station_not_on_route",
    "refusal_low_confidence",
    "refusal_timeout",
    "unknown_train",
    "no_data",
    "clarify_train",
    "clarify_station",
    "clarify_date",
    "greet",
    "help",
    "fallback",
    "satisfaction",
];

/// Minutes with one decimal, or as an integer when the rounded value is whole.
pub fn format_minutes(minutes: f64) -> String {
    let r = (minutes * 10.0).round() / 10.0;
    if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        format!("{r:.1}")
    }
}

fn format_percent(fraction: f64) -> String {
    format_minutes(fraction * 100.0)
}

/// Response templates keyed by result kind and locale.
#[derive(Debug, Clone)]
pub struct Templates {
    by_key: BTreeMap<(String, String), String>,
}

impl Templates {
    pub fn parse(text: &str) -> Result<Self, DialogAssetError> {
        let mut by_key = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.splitn(3, '|').map(str::trim);
            let (Some(kind), Some(locale), Some(body)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(DialogAssetError::Malformed {
                    line: i + 1,
                    message: "expected kind | locale | text".into(),
                });
            };
            by_key.insert((kind.to_string(), locale.to_string()), body.replace("\\n", "\n"));
        }
        let templates = Templates { by_key };
        for kind in REQUIRED_KINDS {
            templates.get(kind, "en")?;
        }
        Ok(templates)
    }

    pub fn bundled() -> Self {
        Templates::parse(DEFAULT_TEMPLATES).expect("bundled templates parse")
    }

    /// The template for `kind` in `locale`, falling back to English.
    pub fn get(&self, kind: &str, locale: &str) -> Result<&str, DialogAssetError> {
        self.by_key
            .get(&(kind.to_string(), locale.to_string()))
            .or_else(|| self.by_key.get(&(kind.to_string(), "en".to_string())))
            .map(String::as_str)
            .ok_or_else(|| DialogAssetError::MissingTemplate {
                kind: kind.to_string(),
                locale: locale.to_string(),
            })
    }

    fn fill(&self, kind: &str, locale: &str, values: &[(&str, String)]) -> String {
        let mut out = self.get(kind, locale).expect("required kinds checked on load").to_string();
        for (key, value) in values {
            out = out.replace(&format!("{{{key}}}"), value);
        }
        out
    }

    pub fn render(&self, result: &PolicyResult, intent: Intent, locale: &str) -> BotResponse {
        let t = |kind: &str, values: &[(&str, String)]| self.fill(kind, locale, values);
        let list = |stations: &[StationEntry]| {
            stations
                .iter()
                .map(|s| format!("{} ({})", s.name, s.code))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut lines = Vec::new();
        match result {
            PolicyResult::Delay { train_number, date, stop, further_delay_min, .. } => {
                let common = [
                    ("train", train_number.clone()),
                    ("station", stop.station.to_string()),
                    ("date", date.to_string()),
                ];
                if stop.expected_late_min < 0.05 {
                    lines.push(t("on_time", &common));
                } else {
                    let mut v = common.to_vec();
                    v.push(("minutes", format_minutes(stop.expected_late_min)));
                    lines.push(t("delay", &v));
                }
                if let Some(further) = further_delay_min {
                    let mut v = common.to_vec();
                    v.push(("minutes", format_minutes(*further)));
                    lines.push(t("further_delay", &v));
                }
            }
            PolicyResult::FurtherDelay { train_number, date, mitigation } => {
                use crate::analytics::MitigationOutcome::*;
                let v = [
                    ("train", train_number.clone()),
                    ("station", mitigation.station.to_string()),
                    ("date", date.to_string()),
                    ("minutes", format_minutes(mitigation.change.abs())),
                ];
                lines.push(match mitigation.outcome {
                    Worsened => t("further_delay", &v),
                    Mitigated => t("further_recovered", &v),
                    Unchanged => t("further_unchanged", &v),
                });
            }
            PolicyResult::AtDestination { train_number, station } => {
                lines.push(t("at_destination", &[("train", train_number.clone()), ("station", station.to_string())]));
            }
            PolicyResult::FirstDelay { train_number, date, threshold_min, first } => {
                let mut v = vec![
                    ("train", train_number.clone()),
                    ("date", date.to_string()),
                    ("threshold", format_minutes(*threshold_min)),
                ];
                match first {
                    Some(s) => {
                        v.push(("station", s.station.to_string()));
                        v.push(("minutes", format_minutes(s.delay)));
                        lines.push(t("first_delay", &v));
                    }
                    None => lines.push(t("no_first_delay", &v)),
                }
            }
            PolicyResult::AverageDelay { train_number, station, mean_late_min, pct_late_over, threshold_min, n_days } => {
                lines.push(t(
                    "average_delay",
                    &[
                        ("train", train_number.clone()),
                        ("station", station.to_string()),
                        ("minutes", format_minutes(*mean_late_min)),
                        ("threshold", format_minutes(*threshold_min)),
                        ("percent", format_percent(*pct_late_over)),
                        ("days", n_days.to_string()),
                    ],
                ));
            }
            PolicyResult::Bottleneck { train_number, bottleneck } => {
                lines.push(t(
                    "bottleneck",
                    &[
                        ("train", train_number.clone()),
                        ("station", bottleneck.station.to_string()),
                        ("minutes", format_minutes(bottleneck.increment)),
                    ],
                ));
            }
            PolicyResult::SimilarTrains { train_number, similar } => {
                if similar.is_empty() {
                    lines.push(t("no_similar_trains", &[("train", train_number.clone())]));
                } else {
                    let trains = similar
                        .iter()
                        .map(|s| format!("{} (correlation {:.2})", s.train_number, s.score))
                        .collect::<Vec<_>>()
                        .join(", ");
                    lines.push(t("similar_trains", &[("train", train_number.clone()), ("trains", trains)]));
                }
            }
            PolicyResult::StationList { train_number, stations } => {
                lines.push(t("station_list", &[("train", train_number.clone()), ("stations", list(stations))]));
            }
            PolicyResult::StationListOffer { train_number, requested_mention, stations, .. } => {
                lines.push(t(
                    "station_not_on_route",
                    &[
                        ("train", train_number.clone()),
                        ("station", requested_mention.clone()),
                        ("stations", list(stations)),
                    ],
                ));
            }
            PolicyResult::Refusal { train_number, reason } => {
                lines.push(match reason {
                    RefusalReason::LowConfidence { confidence, min_confidence } => t(
                        "refusal_low_confidence",
                        &[
                            ("train", train_number.clone()),
                            ("confidence", format!("{confidence:.2}")),
                            ("threshold", format!("{min_confidence:.2}")),
                        ],
                    ),
                    RefusalReason::Timeout { .. } => t("refusal_timeout", &[("train", train_number.clone())]),
                });
            }
            PolicyResult::UnknownTrain { train_number } => {
                lines.push(t("unknown_train", &[("train", train_number.clone())]));
            }
            PolicyResult::NoData { train_number } => lines.push(t("no_data", &[("train", train_number.clone())])),
            PolicyResult::Clarification { request } => lines.push(match request {
                ClarificationRequest::WhichTrain { .. } => t("clarify_train", &[]),
                ClarificationRequest::WhichStation { .. } => t("clarify_station", &[]),
                ClarificationRequest::WhichDate { .. } => t("clarify_date", &[]),
            }),
            PolicyResult::Greeting => lines.push(t("greet", &[])),
            PolicyResult::Help => lines.push(t("help", &[])),
            PolicyResult::Fallback => lines.push(t("fallback", &[])),
        }
        if result.is_answer() {
            lines.push(t("satisfaction", &[]));
        }
        BotResponse {
            text: lines.join("\n"),
            intent,
            payload: result.clone(),
            needs_clarification: result.needs_clarification(),
        }
    }
}
