//! The `trainbot` command line.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use trainbot_core::analytics::{route_summary, DateRange};
use trainbot_core::bench::{
    run_tradeoff, run_rr_scaling, write_csv, write_tradeoff_plot_data, BenchConfig, BenchData,
};
use trainbot_core::dialog::{Assistant, DialogContext, FixedClock};
use trainbot_core::domain::{write_delays, write_schedules, JourneyKey};
use trainbot_core::predictor::{
    evaluate_ci_accuracy, load_registry, save_registry, train_registry, CiLevel, ModelKind, TrainingOptions,
};
use trainbot_core::synthdata::{generate_scenario, split_dataset, Scenario};

use crate::api::{app, AppState};
use crate::config::AppConfig;
use crate::sessions::{MemorySessionStore, SessionStore};
use crate::{
    assistant_from_config, demo_assistant, load_catalog, load_observations, ServiceError, SPLIT_RATIOS,
};

pub const SCHEDULES_FILE: &str = "schedules.csv";
pub const DELAYS_FILE: &str = "delays.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

#[derive(Debug, Parser)]
#[command(name = "trainbot", version, about = "Train delay prediction and chat assistant")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic network and delay history as CSV.
    Generate {
        #[arg(long, default_value = "smooth")]
        scenario: Scenario,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Fit models on the training split and save a bundle.
    Train {
        #[arg(long, default_value = "data")]
        data: PathBuf,
        #[arg(long, default_value = "model.bundle")]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        n_trees: usize,
    },
    /// Interval coverage and error of a bundle on the test split.
    Eval {
        #[arg(long, default_value = "data")]
        data: PathBuf,
        #[arg(long, default_value = "model.bundle")]
        bundle: PathBuf,
        #[arg(long, default_value_t = 99, value_parser = parse_ci_percent)]
        ci: u32,
        #[arg(long, default_value = "forest")]
        model: ModelKind,
        /// Must match the seed given to `train`.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Per-stop average delays of one train as CSV on standard output.
    Analyze {
        #[arg(long, default_value = "data")]
        data: PathBuf,
        #[arg(long)]
        train: String,
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
    },
    /// Timing studies.
    Bench {
        #[arg(long)]
        mode: BenchMode,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 13050)]
        seed: u64,
        /// Tree counts (tradeoff) or station counts (rr-scaling).
        #[arg(long, value_delimiter = ',')]
        counts: Vec<usize>,
        /// Route length of the tradeoff train.
        #[arg(long, default_value_t = 112)]
        stations: usize,
        #[arg(long, default_value_t = 11)]
        repetitions: usize,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Chat with the assistant on the terminal.
    Chat {
        #[command(flatten)]
        world: WorldArgs,
        /// Answer as if today were this date.
        #[arg(long)]
        today: Option<NaiveDate>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchMode {
    Tradeoff,
    RrScaling,
}

fn parse_ci_percent(s: &str) -> Result<u32, String> {
    let p: u32 = s.parse().map_err(|e| format!("{e}"))?;
    CiLevel::try_from(p).map(|l| l.percent()).map_err(|e| e.to_string())
}

/// Where the assistant's data and models come from.
#[derive(Debug, Clone, Args)]
pub struct WorldArgs {
    /// Config file of `key=value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Train on the bundled demo network at startup instead of loading files.
    #[arg(long)]
    pub demo: bool,
    /// Seed for `--demo` training.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub world: WorldArgs,
}

/// One flag per config key, applied over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigOverrides {
    #[arg(long = "server.host", value_name = "HOST")]
    server_host: Option<String>,
    #[arg(long = "server.port", value_name = "PORT")]
    server_port: Option<String>,
    #[arg(long = "model.bundle_path", value_name = "PATH")]
    model_bundle_path: Option<String>,
    #[arg(long = "model.kind", value_name = "KIND")]
    model_kind: Option<String>,
    #[arg(long = "model.n_trees", value_name = "N")]
    model_n_trees: Option<String>,
    #[arg(long = "ci.default_level", value_name = "PERCENT")]
    ci_default_level: Option<String>,
    #[arg(long = "gate.min_confidence", value_name = "X")]
    gate_min_confidence: Option<String>,
    #[arg(long = "gate.timeout_ms", value_name = "MS")]
    gate_timeout_ms: Option<String>,
    #[arg(long = "data.schedules", value_name = "PATH")]
    data_schedules: Option<String>,
    #[arg(long = "data.delays", value_name = "PATH")]
    data_delays: Option<String>,
    #[arg(long = "session.ttl_s", value_name = "SECONDS")]
    session_ttl_s: Option<String>,
}

impl ConfigOverrides {
    fn pairs(&self) -> [(&'static str, &Option<String>); 11] {
        [
            ("server.host", &self.server_host),
            ("server.port", &self.server_port),
            ("model.bundle_path", &self.model_bundle_path),
            ("model.kind", &self.model_kind),
            ("model.n_trees", &self.model_n_trees),
            ("ci.default_level", &self.ci_default_level),
            ("gate.min_confidence", &self.gate_min_confidence),
            ("gate.timeout_ms", &self.gate_timeout_ms),
            ("data.schedules", &self.data_schedules),
            ("data.delays", &self.data_delays),
            ("session.ttl_s", &self.session_ttl_s),
        ]
    }
}

impl WorldArgs {
    pub fn app_config(&self) -> Result<AppConfig, ServiceError> {
        let mut config = match &self.config {
            Some(path) => AppConfig::from_file(path)?,
            None => AppConfig::default(),
        };
        for (key, value) in self.overrides.pairs() {
            if let Some(value) = value {
                config.set(key, value)?;
            }
        }
        Ok(config)
    }

    fn assistant(&self, config: &AppConfig) -> Result<Assistant, ServiceError> {
        if self.demo {
            return demo_assistant(config, self.seed);
        }
        if !config.model_bundle_path.exists() {
            return Err(ServiceError::Usage(format!(
                "model bundle {} not found; run `trainbot train` first, set model.bundle_path, or pass --demo",
                config.model_bundle_path.display()
            )));
        }
        assistant_from_config(config)
    }
}

/// Runs one command. Chat reads turns from `input` and writes replies to
/// `out`, with a `> ` prompt when `interactive`.
pub fn run(cli: Cli, input: impl BufRead, mut out: impl Write, interactive: bool) -> Result<(), ServiceError> {
    match cli.command {
        Command::Generate { scenario, seed, out: dir } => {
            let data = generate_scenario(scenario, seed)?;
            fs::create_dir_all(&dir)?;
            write_schedules(&data.catalog, create(&dir.join(SCHEDULES_FILE))?).map_err(|source| {
                ServiceError::Csv {
                    path: dir.join(SCHEDULES_FILE).display().to_string(),
                    source,
                }
            })?;
            write_delays(&data.observations, create(&dir.join(DELAYS_FILE))?).map_err(|source| {
                ServiceError::Csv {
                    path: dir.join(DELAYS_FILE).display().to_string(),
                    source,
                }
            })?;
            data.truth
                .write_csv(&data.catalog, create(&dir.join(GROUND_TRUTH_FILE))?)
                .map_err(|e| ServiceError::Io(e.into()))?;
            writeln!(
                out,
                "wrote {} trains and {} observations to {}",
                data.catalog.trains.len(),
                data.observations.len(),
                dir.display()
            )?;
        }
        Command::Train {
            data,
            out: bundle,
            seed,
            n_trees,
        } => {
            let catalog = load_catalog(&data.join(SCHEDULES_FILE))?;
            let observations = load_observations(&data.join(DELAYS_FILE))?;
            let split = split_dataset(&observations, SPLIT_RATIOS, seed)?;
            let mut options = TrainingOptions::default();
            options.forest.n_trees = n_trees;
            options.forest.seed = seed;
            let started = Instant::now();
            let registry = train_registry(&catalog, &observations, &split, &options)?;
            save_registry(&registry, &bundle)?;
            writeln!(
                out,
                "trained {} bundles on {} journeys in {:.1} s; saved {}",
                registry.n_bundles(),
                split.train.len(),
                started.elapsed().as_secs_f64(),
                bundle.display()
            )?;
        }
        Command::Eval {
            data,
            bundle,
            ci,
            model,
            seed,
        } => {
            let catalog = load_catalog(&data.join(SCHEDULES_FILE))?;
            let observations = load_observations(&data.join(DELAYS_FILE))?;
            let registry = load_registry(&bundle)?;
            let split = split_dataset(&observations, SPLIT_RATIOS, seed)?;
            let keys = known_test_keys(&catalog, &split.test);
            let level = CiLevel::try_from(ci)?;
            let report = evaluate_ci_accuracy(&registry, &catalog, &observations, &keys, level, model)?;
            writeln!(
                out,
                "coverage {:.4} at {}% ({}, {} stops over {} journeys, rmse {:.3}, mae {:.3})",
                report.coverage, level, model, report.n_predictions, report.n_journeys, report.rmse, report.mae
            )?;
        }
        Command::Analyze { data, train, from, to } => {
            let catalog = load_catalog(&data.join(SCHEDULES_FILE))?;
            let observations = load_observations(&data.join(DELAYS_FILE))?;
            let history: Vec<_> = observations.into_iter().filter(|o| o.train_number == train).collect();
            let summary = route_summary(
                &catalog,
                &history,
                &train,
                DateRange { from, to },
                &Default::default(),
            )
            .map_err(|e| ServiceError::Usage(e.to_string()))?;
            let p = &summary.profile;
            writeln!(out, "stop_index,station_code,station_name,mean_late_min,n_observations")?;
            for (i, code) in p.stations.iter().enumerate() {
                let name = catalog.station_name(code).unwrap_or_default();
                let mean = p.mean_late_min[i].map(|m| format!("{m:.3}")).unwrap_or_default();
                writeln!(out, "{i},{code},{},{mean},{}", csv_field(name), p.counts[i])?;
            }
            if let Some(b) = &summary.bottleneck {
                log::info!("bottleneck {} (+{:.1} min)", b.station, b.increment);
            }
        }
        Command::Bench {
            mode,
            out: path,
            seed,
            counts,
            stations,
            repetitions,
        } => {
            let config = BenchConfig {
                seed,
                repetitions,
                ..BenchConfig::default()
            };
            match mode {
                BenchMode::Tradeoff => {
                    let counts = if counts.is_empty() { vec![1, 5, 10, 25, 50, 100, 200] } else { counts };
                    let bench = BenchData::generate(stations, config.days, seed)?;
                    let rows = run_tradeoff(&bench, &counts, &config)?;
                    write_csv(&rows, create(&path)?)?;
                    let dat = path.with_extension("dat");
                    write_tradeoff_plot_data(&rows, create(&dat)?)?;
                    writeln!(out, "wrote {} and {}", path.display(), dat.display())?;
                }
                BenchMode::RrScaling => {
                    let counts = if counts.is_empty() { vec![10, 50, 112] } else { counts };
                    let rows = run_rr_scaling(&counts, &config)?;
                    write_csv(&rows, create(&path)?)?;
                    writeln!(out, "wrote {}", path.display())?;
                }
            }
        }
        Command::Serve(args) => serve(&args)?,
        Command::Chat { world, today } => {
            let config = world.app_config()?;
            let mut assistant = world.assistant(&config)?;
            if let Some(d) = today {
                assistant = assistant.with_clock(Arc::new(FixedClock(d)));
            }
            chat(&assistant, input, &mut out, interactive)?;
        }
    }
    Ok(())
}

impl From<trainbot_core::bench::BenchError> for ServiceError {
    fn from(e: trainbot_core::bench::BenchError) -> Self {
        ServiceError::Usage(format!("bench: {e}"))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, ServiceError> {
    File::create(path).map(BufWriter::new).map_err(|source| ServiceError::Open {
        path: path.display().to_string(),
        source,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Test journeys of trains that have their own history.
pub fn known_test_keys(
    catalog: &trainbot_core::domain::NetworkCatalog,
    test: &BTreeSet<JourneyKey>,
) -> BTreeSet<JourneyKey> {
    test.iter()
        .filter(|k| catalog.train(&k.train_number).is_some_and(|t| t.known))
        .cloned()
        .collect()
}

/// Reads one turn per line and writes each reply followed by a blank line.
pub fn chat(
    assistant: &Assistant,
    input: impl BufRead,
    out: &mut impl Write,
    interactive: bool,
) -> Result<(), ServiceError> {
    let mut context = DialogContext::new("terminal");
    if interactive {
        write!(out, "> ")?;
        out.flush()?;
    }
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if matches!(line, "quit" | "exit") {
            break;
        }
        let (response, next) = assistant.step(&context, line);
        context = next;
        writeln!(out, "{}\n", response.text)?;
        if interactive {
            write!(out, "> ")?;
        }
        out.flush()?;
    }
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<(), ServiceError> {
    let config = args.world.app_config()?;
    let addr: SocketAddr = format!("{}:{}", config.server_host, config.server_port)
        .parse()
        .map_err(|e| ServiceError::Usage(format!("bad server address: {e}")))?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| {
            ServiceError::Usage(format!("cannot listen on {addr}: {e}; choose another port with --server.port"))
        })?;
        let assistant = tokio::task::block_in_place(|| args.world.assistant(&config))?;
        let sessions = MemorySessionStore::new(config.session_ttl);
        let state = AppState::new(assistant, sessions);
        let purger = state.sessions.clone();
        let period = config.session_ttl.max(std::time::Duration::from_secs(1));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                let n = purger.purge_expired();
                if n > 0 {
                    log::info!("expired {n} sessions");
                }
            }
        });
        log::info!("listening on http://{addr}");
        eprintln!("listening on http://{addr}");
        axum::serve(listener, app(state))
            .with_graceful_shutdown(async {
                tokio::signal::ctrl_c().await.ok();
            })
            .await?;
        Ok(())
    })
}
