//! Simulation: kinematic agents, a seeded sensor, attack injection and a
//! discrete-event engine that produces ADS-B record streams.

pub mod agent;
mod engine;
pub mod feedback;
pub mod queue;
mod scenario;
pub mod sensor;


use thiserror::Error;

pub use agent::{AgentSpec, AgentState, AircraftAgent, Behavior, Waypoint};
pub use engine::{run, run_with, EmittedCount, EventKind, FinalState, LogEntry, MetricsSource, RecordSink, SimCounters, SimOutput};
pub use feedback::{FeedbackConfig, FeedbackController, FeedbackMetrics, Tuning};
pub use queue::{EventQueue, ScheduleError};
pub use scenario::{inject_attack, nominal_scenario, spoof_scenario, Attack, AttackKind, AttackParams, Scenario, RECEIVER};
pub use sensor::{emit_report, Emission, EmitterState, Noise, SensorModel};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown agent {0}")]
    UnknownAgent(String),
    #[error("bad attack parameters: {0}")]
    BadParams(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("io: {0}")]
    Io(String),
}
