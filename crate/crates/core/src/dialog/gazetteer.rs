use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{NetworkCatalog, StationCode};

/// Trailing words dropped to form a short alias ("Varanasi Jn" -> "varanasi").
const NAME_SUFFIXES: [&str; 10] = [
    "jn", "junction", "jct", "central", "cantt", "city", "terminus", "road", "town", "halt",
];

/// Lowercase words that are never read as station codes or fuzzy names.
const NON_STATION_WORDS: &[&str] = &[
    "a", "about", "after", "all", "an", "and", "any", "are", "arrive", "at", "average", "be", "by",
    "can", "day", "delay", "delayed", "delays", "did", "does", "first", "for", "from", "further",
    "help", "how", "i", "in", "is", "it", "its", "late", "list", "meant", "no", "not", "of", "on",
    "route", "show", "similar", "station", "stations", "stop", "stops", "the", "time", "to",
    "today", "tomorrow", "train", "trains", "was", "what", "when", "where", "which", "will",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMatch {
    pub code: StationCode,
    /// The words of the utterance that matched, as written.
    pub mention: String,
    /// 0 for an exact match.
    pub edit_distance: usize,
}

/// Maps station codes, names and short names to codes.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    codes: BTreeMap<String, StationCode>,
    names: BTreeMap<String, StationCode>,
    max_words: usize,
}

fn normalize(s: &str) -> String {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl Gazetteer {
    pub fn from_catalog(catalog: &NetworkCatalog) -> Self {
        let mut g = Gazetteer::default();
        for (code, name) in &catalog.stations {
            g.add(code.clone(), name);
        }
        for schedule in catalog.trains.values() {
            for stop in &schedule.stops {
                g.codes.entry(stop.station.as_str().to_lowercase()).or_insert_with(|| stop.station.clone());
            }
        }
        g
    }

    pub fn add(&mut self, code: StationCode, name: &str) {
        self.codes.insert(code.as_str().to_lowercase(), code.clone());
        let full = normalize(name);
        if full.is_empty() {
            return;
        }
        let words: Vec<&str> = full.split(' ').collect();
        self.max_words = self.max_words.max(words.len());
        if words.len() > 1 && NAME_SUFFIXES.contains(words.last().unwrap()) {
            let short = words[..words.len() - 1].join(" ");
            self.names.entry(short).or_insert_with(|| code.clone());
        }
        self.names.insert(full, code);
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// The best station mention in `text`: exact beats fuzzy, longer beats
    /// shorter, earlier beats later.
    pub fn find(&self, text: &str) -> Option<StationMatch> {
        let words: Vec<(usize, usize)> = word_spans(text);
        let lower: Vec<String> = words.iter().map(|&(a, b)| text[a..b].to_lowercase()).collect();
        let mut best: Option<(usize, usize, usize, StationMatch)> = None;
        let mut consider = |distance: usize, n: usize, start: usize, m: StationMatch| {
            let key = (distance, usize::MAX - n, start);
            if best.as_ref().is_none_or(|b| key < (b.0, b.1, b.2)) {
                best = Some((key.0, key.1, key.2, m));
            }
        };
        for n in (1..=self.max_words.max(1)).rev() {
            for start in 0..words.len().saturating_sub(n - 1) {
                let span = &lower[start..start + n];
                if span.iter().any(|w| w.chars().all(|c| c.is_ascii_digit())) {
                    continue;
                }
                let phrase = span.join(" ");
                let mention = text[words[start].0..words[start + n - 1].1].to_string();
                if n == 1 {
                    if let Some(code) = self.codes.get(&phrase) {
                        let typed_as_code = mention.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit());
                        if typed_as_code || !NON_STATION_WORDS.contains(&phrase.as_str()) {
                            consider(0, n, start, StationMatch { code: code.clone(), mention: mention.clone(), edit_distance: 0 });
                        }
                    }
                }
                if let Some(code) = self.names.get(&phrase) {
                    consider(0, n, start, StationMatch { code: code.clone(), mention, edit_distance: 0 });
                    continue;
                }
                if phrase.chars().count() < 5 || (n == 1 && NON_STATION_WORDS.contains(&phrase.as_str())) {
                    continue;
                }
                for (name, code) in &self.names {
                    if name.split(' ').count() == n && strsim::levenshtein(name, &phrase) == 1 {
                        consider(1, n, start, StationMatch { code: code.clone(), mention: mention.clone(), edit_distance: 1 });
                        break;
                    }
                }
            }
        }
        best.map(|b| b.3)
    }
}

/// Byte ranges of the alphanumeric words of `text`.
fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            spans.push((s, i));
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}
