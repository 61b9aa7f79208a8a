use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use adsb_trust::bench::{
    emit_report, run_latency, run_scenario_e2e, run_throughput, AcMode, BenchError, ExperimentConfig, Property, ThroughputConfig,
};
use adsb_trust::fusion::{RuleSet, Threshold, DEFAULT_THRESHOLD};
use adsb_trust::gateway::Arch;
use adsb_trust::sim::Scenario;

/// Latency, throughput and end-to-end detection experiments.
#[derive(Parser, Debug)]
#[command(name = "bench", version)]
struct Cli {
    /// JSON file with `latency`, `throughput` and `e2e` sections. Values
    /// given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Sequential guarded service requests against a live gateway.
    Latency(LatencyArgs),
    /// Batches of messages through decode, track, features and fusion.
    Throughput(ThroughputArgs),
    /// Attack detection over a simulated scenario.
    E2e(E2eArgs),
}

#[derive(Args, Debug)]
struct LatencyArgs {
    #[arg(long)]
    arch: Option<Arch>,
    #[arg(long)]
    ac: Option<AcMode>,
    /// Total requests, warmup included.
    #[arg(long)]
    requests: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    link_delay_ms: Option<f64>,
    #[arg(long)]
    client_link_delay_ms: Option<f64>,
    #[arg(long)]
    block_interval_ms: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ThroughputArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    queue_capacity: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct E2eArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    /// Rule set as JSON; the default rules otherwise.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    latency: ExperimentConfig,
    throughput: ThroughputConfig,
    e2e: E2eFile,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct E2eFile {
    threshold: f64,
    rules: Option<PathBuf>,
}

impl Default for E2eFile {
    fn default() -> Self {
        E2eFile { threshold: DEFAULT_THRESHOLD, rules: None }
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, BenchError> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario, BenchError> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_json(&text).map_err(|e| BenchError::Scenario(format!("{}: {e}", path.display())))
}

fn latency(file: ExperimentConfig, a: LatencyArgs) -> Result<Vec<Property>, BenchError> {
    let config = ExperimentConfig {
        arch: a.arch.unwrap_or(file.arch),
        ac: a.ac.unwrap_or(file.ac),
        n_requests: a.requests.unwrap_or(file.n_requests),
        warmup_requests: a.warmup.unwrap_or(file.warmup_requests),
        link_delay_ms: a.link_delay_ms.unwrap_or(file.link_delay_ms),
        seed: a.seed.unwrap_or(file.seed),
        client_link_delay_ms: a.client_link_delay_ms.unwrap_or(file.client_link_delay_ms),
        block_interval_ms: a.block_interval_ms.unwrap_or(file.block_interval_ms),
    };
    let run = run_latency(&config)?;
    emit_report(&run.samples, &a.out)?;
    println!("{}", serde_json::to_string_pretty(&run.summary).expect("summary serializes"));
    Ok(run.properties)
}

fn throughput(file: ThroughputConfig, a: ThroughputArgs) -> Result<Vec<Property>, BenchError> {
    let config = ThroughputConfig {
        batches: a.batches.unwrap_or(file.batches),
        batch_size: a.batch_size.unwrap_or(file.batch_size),
        queue_capacity: a.queue_capacity.unwrap_or(file.queue_capacity),
    };
    let run = run_throughput(&load_scenario(&a.scenario)?, &config)?;
    emit_report(&run.rows, &a.out)?;
    println!(
        "messages {} processed {} alerts {} cores {}",
        run.total_messages, run.total_processed, run.alerts, run.cores
    );
    Ok(run.properties)
}

fn e2e(file: E2eFile, a: E2eArgs) -> Result<Vec<Property>, BenchError> {
    let threshold = Threshold::new(a.threshold.unwrap_or(file.threshold)).map_err(|e| BenchError::Config(e.to_string()))?;
    let rules = match a.rules.or(file.rules) {
        Some(p) => RuleSet::from_json(&std::fs::read_to_string(&p)?).map_err(|e| BenchError::Config(e.to_string()))?,
        None => RuleSet::default(),
    };
    let run = run_scenario_e2e(&load_scenario(&a.scenario)?, &rules, threshold)?;
    emit_report(&run.rows, &a.out)?;
    println!("records {} alerts {} bursts {}", run.records, run.alerts.len(), run.bursts);
    Ok(run.properties)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(cli.config.as_deref()).and_then(|file| match cli.cmd {
        Cmd::Latency(a) => latency(file.latency, a),
        Cmd::Throughput(a) => throughput(file.throughput, a),
        Cmd::E2e(a) => e2e(file.e2e, a),
    });
    match result {
        Ok(props) => {
            for p in &props {
                println!("{} {}{}", if p.holds { "PASS" } else { "FAIL" }, p.name, if p.detail.is_empty() { String::new() } else { format!(" ({})", p.detail) });
            }
            if props.iter().all(|p| p.holds) { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::from(2)
        }
    }
}
