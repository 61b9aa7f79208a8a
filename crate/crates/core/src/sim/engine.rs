use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::agent::{AgentState, AircraftAgent};
use super::feedback::{FeedbackController, FeedbackMetrics};
use super::queue::EventQueue;
use super::scenario::{Attack, Scenario};
use super::sensor::{emit_report, Emission, EmitterState};
use super::SimError;
use crate::codec::{write_csv, AdsbRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    EmitReport,
    WaypointReached,
    AttackTrigger,
    FeedbackTick,
}

#[derive(Debug, Clone, PartialEq)]
enum Pending {
    Emit(usize),
    Waypoint(usize, f64, f64),
    Trigger(String, Value),
    Flood(usize, u64),
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub t: f64,
    pub seq: u64,
    pub kind: EventKind,
    pub subject: String,
    pub detail: Value,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SimCounters {
    pub events: u64,
    pub emit_events: u64,
    pub emitted: u64,
    pub out_of_range: u64,
    pub dropped: u64,
    pub withheld: u64,
    pub bursts: u64,
    pub feedback_ticks: u64,
}

impl SimCounters {
    /// Every emit event ends up as exactly one of emitted, out of range,
    /// dropout or withheld.
    pub fn conserved(&self) -> bool {
        self.emitted == self.emit_events - self.out_of_range - self.dropped - self.withheld
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalState {
    pub icao: String,
    pub clock: f64,
    pub state: AgentState,
    pub arrived: bool,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub log: Vec<LogEntry>,
    pub records: Vec<AdsbRecord>,
    pub counters: SimCounters,
    pub final_states: Vec<FinalState>,
}

impl SimOutput {
    /// One JSON object per line, keys in declaration order.
    pub fn log_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.log {
            out.push_str(&serde_json::to_string(e).expect("log entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_records_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        write_csv(w, &self.records).map_err(|e| SimError::Io(e.to_string()))
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.log.iter().filter(|e| e.kind == kind).count()
    }
}

/// Receives the emitted stream in simulated-time order.
pub trait RecordSink {
    fn record(&mut self, t: f64, record: &AdsbRecord);
    fn burst(&mut self, _t: f64, _index: u64) {}
}

impl RecordSink for Vec<AdsbRecord> {
    fn record(&mut self, _t: f64, record: &AdsbRecord) {
        self.push(record.clone());
    }
}

/// Supplies the feedback controller with load readings. `emitted_since`
/// is the number of records emitted since the previous tick.
pub trait MetricsSource {
    fn sample(&mut self, t: f64, emitted_since: u64) -> FeedbackMetrics;
}

/// Uses the emitted record count as the fog queue length.
pub struct EmittedCount;

impl MetricsSource for EmittedCount {
    fn sample(&mut self, _t: f64, emitted_since: u64) -> FeedbackMetrics {
        FeedbackMetrics { fog_queue_len: emitted_since as f64, edge_cpu_proxy: 0.0 }
    }
}

struct NullSink;

impl RecordSink for NullSink {
    fn record(&mut self, _t: f64, _record: &AdsbRecord) {}
}

pub fn run(scenario: &Scenario) -> Result<SimOutput, SimError> {
    run_with(scenario, &mut NullSink, &mut EmittedCount)
}

/// Runs the scenario to its horizon. Events later than `horizon_s` are
/// never scheduled.
pub fn run_with(scenario: &Scenario, sink: &mut dyn RecordSink, metrics: &mut dyn MetricsSource) -> Result<SimOutput, SimError> {
    scenario.validate()?;
    let horizon = scenario.horizon_s;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut agents: Vec<AircraftAgent> = scenario.effective_agents().into_iter().map(AircraftAgent::new).collect();
    let mut memory = vec![EmitterState::default(); agents.len()];
    let mut feedback = scenario.feedback.map(FeedbackController::new);
    let mut queue: EventQueue<Pending> = EventQueue::new();
    let schedule = |q: &mut EventQueue<Pending>, t: f64, p: Pending| -> Result<(), SimError> {
        if t <= horizon {
            q.schedule(t, p)?;
        }
        Ok(())
    };

    for (i, a) in agents.iter().enumerate() {
        schedule(&mut queue, a.report_period_s, Pending::Emit(i))?;
    }
    for (i, attack) in scenario.attacks.iter().enumerate() {
        match attack {
            Attack::Spoof { icao, jump_km, at_time } => {
                schedule(&mut queue, *at_time, Pending::Trigger(icao.clone(), json!({"attack": "spoof", "jump_km": jump_km})))?;
            }
            Attack::Replay { icao, delay_s } => {
                schedule(&mut queue, 0.0, Pending::Trigger(icao.clone(), json!({"attack": "replay", "delay_s": delay_s})))?;
            }
            Attack::DosFlood { rate_per_s, start_s, .. } => {
                for k in 0..attack.burst_count() {
                    schedule(&mut queue, start_s + k as f64 / rate_per_s, Pending::Flood(i, k))?;
                }
            }
        }
    }
    if let Some(fb) = &scenario.feedback {
        schedule(&mut queue, fb.tick_s, Pending::Feedback)?;
    }

    let mut log = Vec::new();
    let mut records = Vec::new();
    let mut c = SimCounters::default();
    let mut since_tick = 0u64;
    let mut scale = 1u32;

    while let Some((t, seq, item)) = queue.pop() {
        c.events += 1;
        let entry = match item {
            Pending::Emit(i) => {
                c.emit_events += 1;
                let agent = &mut agents[i];
                if t > agent.clock {
                    for wp in agent.step(t - agent.clock) {
                        schedule(&mut queue, t, Pending::Waypoint(i, wp.lat_deg, wp.lon_deg))?;
                    }
                }
                let detail = match emit_report(agent, &mut memory[i], &scenario.sensor, &mut rng) {
                    Emission::Emitted(r) => {
                        c.emitted += 1;
                        since_tick += 1;
                        sink.record(t, &r);
                        let d = json!({"outcome": "emitted", "record": r});
                        records.push(r);
                        d
                    }
                    Emission::OutOfRange => {
                        c.out_of_range += 1;
                        json!({"outcome": "out_of_range"})
                    }
                    Emission::Dropped => {
                        c.dropped += 1;
                        json!({"outcome": "dropped"})
                    }
                    Emission::Withheld => {
                        c.withheld += 1;
                        json!({"outcome": "withheld"})
                    }
                };
                schedule(&mut queue, t + agent.report_period_s * scale as f64, Pending::Emit(i))?;
                LogEntry { t, seq, kind: EventKind::EmitReport, subject: agent.icao.clone(), detail }
            }
            Pending::Waypoint(i, lat, lon) => LogEntry {
                t,
                seq,
                kind: EventKind::WaypointReached,
                subject: agents[i].icao.clone(),
                detail: json!({"lat_deg": lat, "lon_deg": lon, "remaining": agents[i].waypoints.len()}),
            },
            Pending::Trigger(subject, detail) => LogEntry { t, seq, kind: EventKind::AttackTrigger, subject, detail },
            Pending::Flood(attack, index) => {
                c.bursts += 1;
                sink.burst(t, index);
                LogEntry {
                    t,
                    seq,
                    kind: EventKind::AttackTrigger,
                    subject: "dos_flood".into(),
                    detail: json!({"attack": attack, "index": index}),
                }
            }
            Pending::Feedback => {
                c.feedback_ticks += 1;
                let ctl = feedback.as_mut().expect("feedback configured");
                let m = metrics.sample(t, since_tick);
                since_tick = 0;
                let tuning = ctl.tick(m);
                scale = tuning.report_period_scale;
                let tick_s = scenario.feedback.map(|f| f.tick_s).unwrap_or(f64::INFINITY);
                schedule(&mut queue, t + tick_s, Pending::Feedback)?;
                LogEntry {
                    t,
                    seq,
                    kind: EventKind::FeedbackTick,
                    subject: "feedback".into(),
                    detail: json!({
                        "fog_queue_len": m.fog_queue_len,
                        "edge_cpu_proxy": m.edge_cpu_proxy,
                        "report_period_scale": tuning.report_period_scale,
                        "threshold_unchanged": tuning.threshold_unchanged,
                    }),
                }
            }
        };
        log.push(entry);
    }

    let final_states = agents
        .iter()
        .map(|a| FinalState { icao: a.icao.clone(), clock: a.clock, state: a.state, arrived: a.arrived })
        .collect();
    Ok(SimOutput { log, records, counters: c, final_states })
}
