use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeneratorConfig, SynthError};
use crate::domain::{NetworkCatalog, ScheduleStop, StationCode, TrainSchedule};
use crate::mlcore::mix_seed;

const LETTERS: &[u8; 26] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ";

const NAME_HEADS: &[&str] = &[
    "Ram", "Shiv", "Chand", "Bhav", "Kal", "Sur", "Hari", "Dev", "Raj", "Ganga", "Madh", "Nar",
    "Sita", "Bal", "Kishan", "Mohan", "Indra", "Lal", "Anand", "Vijay", "Jai", "Kam", "Sultan",
    "Shah", "Fateh", "Mir", "Bah", "Aur", "Dhar", "Gopal", "Kesar", "Nand", "Param", "Roop",
    "Sona", "Tara", "Uday", "Vasu", "Yash", "Hira", "Kusum", "Moti", "Neel", "Pratap", "Rani",
];

const NAME_TAILS: &[&str] = &[
    "pur", "nagar", "garh", "abad", "ganj", "pura", "wadi", "kot", "dih", "bari", "gaon", "khed",
    "ner", "sar", "patti", "ghat", "wara", "pet", "halli", "mau",
];

const NAME_SUFFIXES: &[&str] = &["", "", "", " Jn", " Road", " City", " Cantt"];

/// Code of the station at `position` along corridor `corridor`: the corridor
/// letter followed by two letters encoding the position.
pub fn corridor_station_code(corridor: usize, position: usize) -> StationCode {
    let c = LETTERS[corridor % 26] as char;
    let hi = LETTERS[(position / 26) % 26] as char;
    let lo = LETTERS[position % 26] as char;
    StationCode::new(format!("{c}{hi}{lo}"))
}

struct Corridor {
    codes: Vec<StationCode>,
    km: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Service {
    Premium,
    Express,
    Passenger,
}

impl Service {
    fn speed_kmh(self) -> f64 {
        match self {
            Service::Premium => 75.0,
            Service::Express => 55.0,
            Service::Passenger => 40.0,
        }
    }

    fn dwell_range(self) -> (i64, i64) {
        match self {
            Service::Premium => (2, 5),
            Service::Express => (2, 10),
            Service::Passenger => (1, 4),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Service::Premium => "Superfast Express",
            Service::Express => "Express",
            Service::Passenger => "Passenger",
        }
    }
}

/// Builds corridors of stations and lays routes over them.
///
/// Each train runs along one corridor (either direction) and stops at a
/// sorted subset of the stations in a contiguous stretch. Stations are shared
/// between trains on the same corridor, which is what lets pooled per-station
/// models serve trains without their own history.
pub fn generate_network(config: &GeneratorConfig) -> Result<NetworkCatalog, SynthError> {
    config.validate()?;
    let mut catalog = NetworkCatalog::default();

    let mut name_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x4e41_4d45));
    let mut used_names = BTreeSet::new();
    let mut corridors = Vec::with_capacity(config.n_corridors);
    for c in 0..config.n_corridors {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x1000 + c as u64));
        let mut codes = Vec::with_capacity(config.corridor_length);
        let mut km = Vec::with_capacity(config.corridor_length);
        let mut at = 0.0;
        for p in 0..config.corridor_length {
            if p > 0 {
                at += rng.random_range(6.0..35.0_f64).round();
            }
            let code = corridor_station_code(c, p);
            let name = unique_name(&mut name_rng, &mut used_names);
            catalog.stations.insert(code.clone(), name);
            codes.push(code);
            km.push(at);
        }
        corridors.push(Corridor { codes, km });
    }

    let n_trains = config.n_known_trains + config.n_unknown_trains;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x5452_4149));
    let mut numbers = BTreeSet::new();
    for t in 0..n_trains {
        let number = loop {
            let n = rng.random_range(10_000..30_000u32).to_string();
            if numbers.insert(n.clone()) {
                break n;
            }
        };
        let service = match rng.random_range(0..10) {
            0..=1 => Service::Premium,
            2..=7 => Service::Express,
            _ => Service::Passenger,
        };
        let corridor = &corridors[rng.random_range(0..corridors.len())];
        let (lo, hi) = config.stations_per_train;
        let n_stops = rng.random_range(lo..=hi);
        let span = (n_stops + rng.random_range(0..=n_stops)).min(corridor.codes.len());
        let start = rng.random_range(0..=corridor.codes.len() - span);
        let end = start + span - 1;

        let mut interior: Vec<usize> = (start + 1..end).collect();
        interior.shuffle(&mut rng);
        interior.truncate(n_stops - 2);
        let mut positions: Vec<usize> = std::iter::once(start)
            .chain(interior)
            .chain(std::iter::once(end))
            .collect();
        positions.sort_unstable();
        if rng.random_bool(0.5) {
            positions.reverse();
        }

        let departure_clock = rng.random_range(0..1440i64);
        let origin_km = corridor.km[positions[0]];
        let (dmin, dmax) = service.dwell_range();
        let mut stops = Vec::with_capacity(positions.len());
        let mut clock = 0i64;
        let mut prev_km = 0.0;
        for (i, &p) in positions.iter().enumerate() {
            let distance_km = (corridor.km[p] - origin_km).abs();
            let (arrival, departure) = if i == 0 {
                (0, 0)
            } else {
                let run = ((distance_km - prev_km) / service.speed_kmh() * 60.0).round() as i64;
                let arrival = clock + run.max(1);
                let dwell = if i + 1 == positions.len() {
                    0
                } else {
                    rng.random_range(dmin..=dmax)
                };
                (arrival, arrival + dwell)
            };
            stops.push(ScheduleStop {
                station: corridor.codes[p].clone(),
                stop_index: i,
                day_offset: ((departure_clock + arrival) / 1440) as u32,
                sched_arrival_min: arrival,
                sched_departure_min: departure,
                distance_km,
            });
            clock = departure;
            prev_km = distance_km;
        }

        let short = |code: &StationCode| {
            catalog.stations[code]
                .split(' ')
                .next()
                .unwrap_or_default()
                .to_string()
        };
        let train_name = format!(
            "{} {} {}",
            short(&stops[0].station),
            short(&stops[stops.len() - 1].station),
            service.label()
        );
        catalog.insert_train(TrainSchedule {
            train_number: number,
            train_name,
            stops,
            known: t < config.n_known_trains,
        });
    }

    let used: BTreeSet<StationCode> = catalog
        .trains
        .values()
        .flat_map(|t| t.stops.iter().map(|s| s.station.clone()))
        .collect();
    catalog.stations = std::mem::take(&mut catalog.stations)
        .into_iter()
        .filter(|(code, _)| used.contains(code))
        .collect::<BTreeMap<_, _>>();
    Ok(catalog)
}

fn unique_name(rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    for _ in 0..64 {
        let head = NAME_HEADS[rng.random_range(0..NAME_HEADS.len())];
        let tail = NAME_TAILS[rng.random_range(0..NAME_TAILS.len())];
        let suffix = NAME_SUFFIXES[rng.random_range(0..NAME_SUFFIXES.len())];
        let stem = format!("{head}{tail}");
        // Stems must be unique on their own so the gazetteer can match them
        // without the suffix.
        if used.insert(stem.clone()) {
            return format!("{stem}{suffix}");
        }
    }
    let n = used.len();
    let stem = format!("Halt {n}");
    used.insert(stem.clone());
    stem
}
