//! ATC alert delivery with per-aircraft duplicate suppression, bounded
//! retries and a dead-letter file.

use std::collections::{HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub icao: String,
    pub first_seen: f64,
    pub decided_at: f64,
    pub score: f64,
    pub threshold: f64,
    pub message: String,
    pub sink_ack: bool,
}

#[derive(Debug, Error)]
#[error("alert sink unavailable: {0}")]
pub struct SinkUnavailable(pub String);

pub trait AlertSink: Send + Sync {
    fn deliver(&self, line: &str) -> Result<(), SinkUnavailable>;
}

/// Appends newline-delimited JSON to a file.
pub struct FileSink {
    path: PathBuf,
    lock: Mutex<()>,
}

impl FileSink {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        FileSink { path: path.into(), lock: Mutex::new(()) }
    }
}

impl AlertSink for FileSink {
    fn deliver(&self, line: &str) -> Result<(), SinkUnavailable> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        append_line(&self.path, line).map_err(|e| SinkUnavailable(e.to_string()))
    }
}

/// POSTs each alert as a JSON body.
pub struct WebhookSink {
    url: String,
    agent: ureq::Agent,
}

impl WebhookSink {
    pub fn new(url: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(5)))
            .build()
            .into();
        WebhookSink { url: url.into(), agent }
    }
}

impl AlertSink for WebhookSink {
    fn deliver(&self, line: &str) -> Result<(), SinkUnavailable> {
        self.agent
            .post(&self.url)
            .header("Content-Type", "application/json")
            .send(line)
            .map(|_| ())
            .map_err(|e| SinkUnavailable(e.to_string()))
    }
}

/// Collects lines in memory; handy for tests and the simulator.
#[derive(Default)]
pub struct MemorySink {
    lines: Mutex<Vec<String>>,
    failures_left: Mutex<u32>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails the next `n` deliveries.
    pub fn failing(n: u32) -> Self {
        MemorySink { lines: Mutex::new(Vec::new()), failures_left: Mutex::new(n) }
    }

    pub fn lines(&self) -> Vec<String> {
        self.lines.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl AlertSink for MemorySink {
    fn deliver(&self, line: &str) -> Result<(), SinkUnavailable> {
        let mut left = self.failures_left.lock().unwrap_or_else(|e| e.into_inner());
        if *left > 0 {
            *left -= 1;
            return Err(SinkUnavailable("injected failure".into()));
        }
        self.lines.lock().unwrap_or_else(|e| e.into_inner()).push(line.to_string());
        Ok(())
    }
}

fn append_line(path: &Path, line: &str) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchOutcome {
    Delivered,
    Suppressed,
    DeadLettered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suppression {
    pub icao: String,
    pub first_seen: f64,
    pub decided_at: f64,
    pub last_delivered_at: f64,
}

#[derive(Debug, Clone)]
pub struct DispatchPolicy {
    pub dedup_window_s: f64,
    pub retries: u32,
    pub backoff: Duration,
}

impl Default for DispatchPolicy {
    fn default() -> Self {
        DispatchPolicy {
            dedup_window_s: 60.0,
            retries: 3,
            backoff: Duration::from_millis(50),
        }
    }
}

#[derive(Default)]
struct DedupTable {
    last_delivered: HashMap<String, f64>,
    seen: HashSet<(String, u64, u64)>,
    suppressions: Vec<Suppression>,
}

pub struct AlertDispatcher {
    sink: Box<dyn AlertSink>,
    dead_letter: PathBuf,
    policy: DispatchPolicy,
    table: Mutex<DedupTable>,
}

impl AlertDispatcher {
    pub fn new(sink: Box<dyn AlertSink>, dead_letter: impl Into<PathBuf>, policy: DispatchPolicy) -> Self {
        AlertDispatcher {
            sink,
            dead_letter: dead_letter.into(),
            policy,
            table: Mutex::new(DedupTable::default()),
        }
    }

    pub fn suppressions(&self) -> Vec<Suppression> {
        self.table.lock().unwrap_or_else(|e| e.into_inner()).suppressions.clone()
    }

    /// Delivers `alert` unless the same triple was already handled or the
    /// aircraft had a delivery less than the dedup window ago (by
    /// `decided_at`). Failed deliveries are retried with exponential backoff
    /// and then written to the dead-letter file.
    pub fn dispatch(&self, mut alert: Alert) -> (Alert, DispatchOutcome) {
        {
            let mut table = self.table.lock().unwrap_or_else(|e| e.into_inner());
            let triple = (alert.icao.clone(), alert.first_seen.to_bits(), alert.decided_at.to_bits());
            let recent = table
                .last_delivered
                .get(&alert.icao)
                .copied()
                .filter(|&last| alert.decided_at - last < self.policy.dedup_window_s);
            if table.seen.contains(&triple) || recent.is_some() {
                let last_delivered_at = recent.unwrap_or(alert.decided_at);
                table.suppressions.push(Suppression {
                    icao: alert.icao.clone(),
                    first_seen: alert.first_seen,
                    decided_at: alert.decided_at,
                    last_delivered_at,
                });
                alert.sink_ack = false;
                return (alert, DispatchOutcome::Suppressed);
            }
            table.seen.insert(triple);
            table.last_delivered.insert(alert.icao.clone(), alert.decided_at);
        }

        alert.sink_ack = true;
        let line = serde_json::to_string(&alert).expect("alert serializes");
        let mut delay = self.policy.backoff;
        let mut attempt = 0;
        loop {
            match self.sink.deliver(&line) {
                Ok(()) => return (alert, DispatchOutcome::Delivered),
                Err(e) if attempt < self.policy.retries => {
                    log::warn!("alert delivery for {} failed ({e}); retry {}", alert.icao, attempt + 1);
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => {
                    log::error!("alert for {} dead-lettered: {e}", alert.icao);
                    alert.sink_ack = false;
                    let line = serde_json::to_string(&alert).expect("alert serializes");
                    if let Err(io) = append_line(&self.dead_letter, &line) {
                        log::error!("dead-letter write failed: {io}");
                    }
                    return (alert, DispatchOutcome::DeadLettered);
                }
            }
        }
    }
}
