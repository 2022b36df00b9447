//! A hand-written network of five real Indian Railways services, used by the
//! chat demo and the scripted conversation tests. Distances are approximate
//! and timings are derived from a nominal running speed.

use chrono::NaiveDate;

use super::{BottleneckSpec, GeneratorConfig};
use crate::domain::{NetworkCatalog, ScheduleStop, StationCode, TrainSchedule};

const STATIONS: &[(&str, &str)] = &[
    ("HWH", "Howrah Jn"),
    ("BWN", "Barddhaman Jn"),
    ("ASN", "Asansol Jn"),
    ("DHN", "Dhanbad Jn"),
    ("GAYA", "Gaya Jn"),
    ("DDU", "Mughal Sarai Jn"),
    ("MZP", "Mirzapur"),
    ("ALD", "Allahabad Jn"),
    ("CNB", "Kanpur Central"),
    ("TDL", "Tundla Jn"),
    ("AGC", "Agra Cantt"),
    ("BTE", "Bharatpur Jn"),
    ("JP", "Jaipur"),
    ("JU", "Jodhpur Jn"),
    ("JAJ", "Jhajha"),
    ("KIUL", "Kiul Jn"),
    ("PNBE", "Patna Jn"),
    ("BXR", "Buxar"),
    ("NDLS", "New Delhi"),
    ("BSB", "Varanasi Jn"),
    ("BOY", "Bhadohi"),
    ("FTP", "Fatehpur"),
    ("ETW", "Etawah"),
    ("ALJN", "Aligarh Jn"),
    ("ASR", "Amritsar Jn"),
    ("JUC", "Jalandhar City"),
    ("LDH", "Ludhiana Jn"),
    ("UMB", "Ambala Cantt"),
    ("SRE", "Saharanpur"),
    ("MB", "Moradabad"),
    ("BE", "Bareilly"),
    ("SPN", "Shahjahanpur"),
    ("LKO", "Lucknow"),
    ("SLN", "Sultanpur"),
];

struct DemoTrain {
    number: &'static str,
    name: &'static str,
    known: bool,
    /// Departure from origin, minutes after midnight.
    departs: i64,
    speed_kmh: f64,
    dwell: i64,
    stops: &'static [(&'static str, f64)],
}

const TRAINS: &[DemoTrain] = &[
    DemoTrain {
        number: "12307",
        name: "Howrah Jodhpur Express",
        known: true,
        departs: 23 * 60 + 40,
        speed_kmh: 52.0,
        dwell: 5,
        stops: &[
            ("HWH", 0.0),
            ("BWN", 107.0),
            ("ASN", 200.0),
            ("DHN", 259.0),
            ("GAYA", 458.0),
            ("DDU", 670.0),
            ("MZP", 733.0),
            ("ALD", 822.0),
            ("CNB", 1016.0),
            ("TDL", 1243.0),
            ("AGC", 1278.0),
            ("BTE", 1332.0),
            ("JP", 1510.0),
            ("JU", 1826.0),
        ],
    },
    DemoTrain {
        number: "12305",
        name: "Kolkata Rajdhani",
        known: true,
        departs: 14 * 60 + 5,
        speed_kmh: 86.0,
        dwell: 2,
        stops: &[
            ("HWH", 0.0),
            ("ASN", 200.0),
            ("JAJ", 358.0),
            ("KIUL", 412.0),
            ("PNBE", 532.0),
            ("BXR", 657.0),
            ("DDU", 749.0),
            ("ALD", 902.0),
            ("CNB", 1096.0),
            ("NDLS", 1529.0),
        ],
    },
    DemoTrain {
        number: "12301",
        name: "Howrah Rajdhani",
        known: true,
        departs: 16 * 60 + 50,
        speed_kmh: 85.0,
        dwell: 3,
        stops: &[
            ("HWH", 0.0),
            ("ASN", 200.0),
            ("DHN", 259.0),
            ("GAYA", 458.0),
            ("DDU", 664.0),
            ("ALD", 817.0),
            ("CNB", 1010.0),
            ("NDLS", 1450.0),
        ],
    },
    DemoTrain {
        number: "12559",
        name: "Shiv Ganga Express",
        known: true,
        departs: 19 * 60 + 30,
        speed_kmh: 62.0,
        dwell: 4,
        stops: &[
            ("BSB", 0.0),
            ("BOY", 45.0),
            ("ALD", 126.0),
            ("FTP", 243.0),
            ("CNB", 320.0),
            ("ETW", 458.0),
            ("TDL", 550.0),
            ("ALJN", 628.0),
            ("NDLS", 760.0),
        ],
    },
    DemoTrain {
        number: "13050",
        name: "Amritsar Howrah Express",
        known: false,
        departs: 18 * 60 + 25,
        speed_kmh: 42.0,
        dwell: 6,
        stops: &[
            ("ASR", 0.0),
            ("JUC", 80.0),
            ("LDH", 137.0),
            ("UMB", 252.0),
            ("SRE", 335.0),
            ("MB", 560.0),
            ("BE", 650.0),
            ("SPN", 720.0),
            ("LKO", 880.0),
            ("SLN", 1020.0),
            ("BSB", 1235.0),
            ("DDU", 1252.0),
            ("GAYA", 1464.0),
            ("DHN", 1663.0),
            ("ASN", 1722.0),
            ("BWN", 1815.0),
            ("HWH", 1922.0),
        ],
    },
];

pub fn demo_catalog() -> NetworkCatalog {
    let mut catalog = NetworkCatalog::default();
    for (code, name) in STATIONS {
        catalog.stations.insert(StationCode::from(*code), name.to_string());
    }
    for t in TRAINS {
        let mut stops = Vec::with_capacity(t.stops.len());
        let mut clock = 0i64;
        let mut prev_km = 0.0;
        for (i, &(code, km)) in t.stops.iter().enumerate() {
            let (arrival, departure) = if i == 0 {
                (0, 0)
            } else {
                let arrival = clock + ((km - prev_km) / t.speed_kmh * 60.0).round() as i64;
                let dwell = if i + 1 == t.stops.len() { 0 } else { t.dwell };
                (arrival, arrival + dwell)
            };
            stops.push(ScheduleStop {
                station: StationCode::from(code),
                stop_index: i,
                day_offset: ((t.departs + arrival) / 1440) as u32,
                sched_arrival_min: arrival,
                sched_departure_min: departure,
                distance_km: km,
            });
            clock = departure;
            prev_km = km;
        }
        catalog.insert_train(TrainSchedule {
            train_number: t.number.to_string(),
            train_name: t.name.to_string(),
            stops,
            known: t.known,
        });
    }
    catalog
}

/// Delay process for the demo network: one year of history ending just
/// before the scripted conversation date, a winter bottleneck at Kanpur and
/// a year-round one at Tundla.
pub(super) fn demo_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        n_known_trains: 4,
        n_unknown_trains: 1,
        stations_per_train: (8, 17),
        start_date: NaiveDate::from_ymd_opt(2017, 9, 1).unwrap(),
        end_date: NaiveDate::from_ymd_opt(2018, 8, 31).unwrap(),
        noise_sigma: 8.0,
        propagation_alpha: 0.9,
        recovery_rate: 0.2,
        station_congestion_max: 8.0,
        bottlenecks: vec![
            BottleneckSpec {
                station: StationCode::from("CNB"),
                mean_added_delay: 60.0,
                active_months: vec![12, 1, 2],
            },
            BottleneckSpec {
                station: StationCode::from("TDL"),
                mean_added_delay: 45.0,
                active_months: (1..=12).collect(),
            },
        ],
        ..GeneratorConfig::default()
    }
}
