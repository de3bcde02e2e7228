use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use calltriage::evalkit::{run_report, write_report_files, ReportOptions};
use calltriage::knowledge::{preprocess_dataset, read_raw_csv_file, write_corpus_file, KnowledgeBase};
use calltriage::media_gateway::ScenarioFile;
use calltriage::service::simulate::load_named_scenario;
use calltriage::service::{http, run_simulation, Pipeline, ServiceConfig};

type Result<T> = std::result::Result<T, Box<dyn Error + Send + Sync>>;

/// Config file picked up from the working directory when `--config` is absent.
const DEFAULT_CONFIG: &str = "calltriage.toml";

#[derive(Parser)]
#[command(name = "calltriage", version, about = "Emergency call triage service and tools")]
struct Cli {
    /// TOML config file [default: ./calltriage.toml when present]
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP/WebSocket service.
    Serve,
    /// Replay one scenario through the lossy channel and print the report as JSON.
    Simulate {
        /// Scenario JSON file, or a scenario name from the configured directory
        #[arg(long)]
        scenario: String,
        /// Independent per-frame loss probability
        #[arg(long)]
        loss: Option<f64>,
        #[arg(long)]
        burst_enter: Option<f64>,
        #[arg(long)]
        burst_exit: Option<f64>,
        #[arg(long)]
        burst_loss: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Corpus CSV to retrieve from, overriding the config
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Turn raw call transcripts into retrieval records.
    PrepData {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against references; writes a .json and a .csv report.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        concepts: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_n: usize,
    },
    /// Fit the TF-IDF model and index over a corpus and save it.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        /// Output file [default: the corpus path with extension .index.json]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(explicit: Option<&Path>, corpus: Option<&Path>) -> Result<ServiceConfig> {
    let default = Path::new(DEFAULT_CONFIG);
    let path = explicit.or_else(|| default.is_file().then_some(default));
    let mut extra = Vec::new();
    if let Some(c) = corpus {
        extra.push(("TRIAGE_PATHS__CORPUS".to_string(), std::path::absolute(c)?.display().to_string()));
    }
    Ok(ServiceConfig::load_with(path, extra)?)
}

fn simulate(
    cfg: &ServiceConfig,
    scenario: &str,
    loss: Option<f64>,
    burst: [Option<f64>; 3],
    seed: Option<u64>,
) -> Result<String> {
    let path = Path::new(scenario);
    let scenario = if path.is_file() {
        ScenarioFile::load(path)?
    } else {
        load_named_scenario(&cfg.paths.scenarios, scenario)?
    };
    let mut channel = cfg.channel.clone();
    let [enter, exit, burst_loss] = burst;
    if let Some(v) = loss {
        channel.p_random = v;
    }
    if let Some(v) = enter {
        channel.burst_enter = v;
    }
    if let Some(v) = exit {
        channel.burst_exit = v;
    }
    if let Some(v) = burst_loss {
        channel.burst_loss = v;
    }
    if let Some(v) = seed {
        channel.seed = v;
    }
    let pipeline = Arc::new(Pipeline::from_config(cfg)?);
    let report = run_simulation(pipeline, &cfg.runtime(), &scenario, &channel)?;
    Ok(serde_json::to_string_pretty(&report)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve => {
            let cfg = load_config(cli.config.as_deref(), None)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                tokio::select! {
                    r = http::run(cfg) => r,
                    _ = tokio::signal::ctrl_c() => {
                        tracing::info!("shutting down");
                        Ok(())
                    }
                }
            })?;
        }
        Command::Simulate { scenario, loss, burst_enter, burst_exit, burst_loss, seed, corpus } => {
            let cfg = load_config(cli.config.as_deref(), corpus.as_deref())?;
            println!("{}", simulate(&cfg, &scenario, loss, [burst_enter, burst_exit, burst_loss], seed)?);
        }
        Command::PrepData { input, out } => {
            let raw = read_raw_csv_file(&input)?;
            let records = preprocess_dataset(&raw);
            write_corpus_file(&records, &out)?;
            eprintln!("kept {} of {} conversations -> {}", records.len(), raw.len(), out.display());
        }
        Command::Eval { pred, gold, concepts, out, max_n } => {
            let report = run_report(&pred, &gold, concepts.as_deref(), ReportOptions { max_n })?;
            let (json, csv) = write_report_files(&report, &out)?;
            println!("{}", serde_json::to_string_pretty(&report.aggregate)?);
            eprintln!("wrote {} and {}", json.display(), csv.display());
        }
        Command::Index { corpus, out } => {
            let kb = KnowledgeBase::from_corpus_file(&corpus)?;
            let out = out.unwrap_or_else(|| corpus.with_extension("index.json"));
            kb.save_json(&out)?;
            eprintln!("indexed {} records, {} terms -> {}", kb.len(), kb.model().dim(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
