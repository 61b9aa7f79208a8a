//! Experiment harness: latency (micro vs mono, with and without access
//! control), edge/fog throughput, and end-to-end detection over simulated
//! scenarios, with CSV reports.

mod e2e;
mod latency;
mod report;
mod testbed;
mod throughput;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::ChainError;
use crate::fusion::{AlertDispatcher, AlertSink, DispatchPolicy, FogNode, GridConfig, RuleSet, Threshold};
use crate::gateway::GatewayError;
use crate::tracker::AirspaceBox;

pub use e2e::{detect, run_scenario_e2e, E2eRun, RaisedAlert, VerdictRow};
pub use latency::{
    latency_properties, quantile, run_latency, summarize, AcMode, ExperimentConfig, LatencyRun, LatencySample, LatencySummary,
};
pub use report::{emit_report, read_report, to_csv};
pub use testbed::{Testbed, FEATURE_RESOURCES};
pub use throughput::{encode_message, run_throughput, BatchRow, ThroughputConfig, ThroughputRun};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("service down: {0}")]
    ServiceDown(String),
    #[error("chain stalled")]
    ChainStalled,
    #[error("queue overflow in batch {batch}")]
    QueueOverflow { batch: usize },
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("config: {0}")]
    Config(String),
    #[error("contract call failed: {0}")]
    Contract(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// A checked property of a run; the CLI exits non-zero if any fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Property {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl Property {
    pub fn new(name: &str, holds: bool, detail: String) -> Self {
        Property { name: name.to_string(), holds, detail }
    }
}

/// Fog node over the whole globe in 10 degree cells.
pub(crate) fn fog_node(rules: RuleSet, threshold: Threshold, sink: Box<dyn AlertSink>) -> Result<FogNode, BenchError> {
    let dead_letter = std::env::temp_dir().join(format!("adsb-bench-dead-letter-{}.ndjson", std::process::id()));
    let dispatcher = AlertDispatcher::new(sink, dead_letter, DispatchPolicy::default());
    FogNode::new(GridConfig::new(AirspaceBox::WORLD, 18, 36), rules, threshold, dispatcher)
        .map_err(|e| BenchError::Config(e.to_string()))
}
