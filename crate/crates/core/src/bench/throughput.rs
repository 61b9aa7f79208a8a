use std::collections::VecDeque;
use std::time::Instant;

use cpu_time::ProcessTime;
use serde::{Deserialize, Serialize};

use super::{fog_node, BenchError, Property};
use crate::codec::{cpr_encode, decode, encode_position, encode_velocity, AdsbRecord, Parity, RawFrame, RecordAssembler};
use crate::fusion::{MemorySink, RuleSet, Threshold};
use crate::sim::{run, Scenario};
use crate::tracker::{extract_features, FeatureVector, TrackStore, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThroughputConfig {
    pub batches: usize,
    pub batch_size: usize,
    /// Bound on feature vectors waiting between the edge and fog stages.
    pub queue_capacity: usize,
}

impl Default for ThroughputConfig {
    fn default() -> Self {
        ThroughputConfig { batches: 15, batch_size: 100, queue_capacity: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub batch: usize,
    pub messages: usize,
    pub processed: usize,
    pub wall_ms: f64,
    pub cpu_ms: f64,
    /// Process CPU time over wall time.
    pub utilization: f64,
}

#[derive(Debug, Clone)]
pub struct ThroughputRun {
    pub rows: Vec<BatchRow>,
    pub total_messages: usize,
    pub total_processed: usize,
    pub alerts: u64,
    pub cores: usize,
    pub properties: Vec<Property>,
}

/// One over-the-air report: a velocity frame and an even/odd position pair
/// stamped with the record time.
pub fn encode_message(r: &AdsbRecord) -> Result<[RawFrame; 3], BenchError> {
    let enc = |e: crate::codec::CodecError| BenchError::Scenario(format!("{}: {e}", r.icao));
    let even = cpr_encode(r.lat_deg, r.lon_deg, Parity::Even, r.timestamp).map_err(enc)?;
    let odd = cpr_encode(r.lat_deg, r.lon_deg, Parity::Odd, r.timestamp).map_err(enc)?;
    Ok([
        encode_velocity(&r.icao, r.ground_speed_kt, r.track_deg, r.vertical_rate_fpm, r.timestamp).map_err(enc)?,
        encode_position(&r.icao, &even, r.altitude_ft).map_err(enc)?,
        encode_position(&r.icao, &odd, r.altitude_ft).map_err(enc)?,
    ])
}

struct Edge {
    assembler: RecordAssembler,
    tracks: TrackStore,
}

impl Edge {
    /// Decodes the frames of one message and pushes the resulting record
    /// through the tracker. Returns the fresh feature vector, if the track
    /// has history, and whether the message made it through.
    fn ingest(&mut self, frames: &[RawFrame]) -> (bool, Option<FeatureVector>) {
        let mut record = None;
        for f in frames {
            match decode(f) {
                Ok(msg) => {
                    if let Some(r) = self.assembler.push(&msg) {
                        record = Some(r);
                    }
                }
                Err(e) => log::warn!("undecodable frame {}: {e}", f.to_hex()),
            }
        }
        let Some(record) = record else { return (false, None) };
        match self.tracks.update(&record) {
            Ok(crate::tracker::UpdateOutcome::Created) => (true, None),
            Ok(crate::tracker::UpdateOutcome::Appended { .. }) => {
                let fv = self.tracks.get(&record.icao).and_then(|t| extract_features(t).ok());
                (true, fv)
            }
            Ok(crate::tracker::UpdateOutcome::Closed) | Err(_) => (false, None),
        }
    }
}

/// Runs the scenario for its record stream, then pushes `batches x
/// batch_size` messages through decode, tracking, feature extraction and
/// fusion, timing each batch. Frame encoding happens before the clock
/// starts.
pub fn run_throughput(scenario: &Scenario, config: &ThroughputConfig) -> Result<ThroughputRun, BenchError> {
    if config.batches == 0 || config.batch_size == 0 || config.queue_capacity == 0 {
        return Err(BenchError::Config("batches, batch_size and queue_capacity must be positive".into()));
    }
    let out = run(scenario).map_err(|e| BenchError::Scenario(e.to_string()))?;
    let needed = config.batches * config.batch_size;
    if out.records.len() < needed {
        return Err(BenchError::Scenario(format!(
            "scenario emitted {} records, {needed} needed",
            out.records.len()
        )));
    }
    let messages: Vec<[RawFrame; 3]> = out.records[..needed].iter().map(encode_message).collect::<Result<_, _>>()?;

    let mut edge = Edge { assembler: RecordAssembler::new(), tracks: TrackStore::new(TrackerConfig::default()) };
    let mut fog = fog_node(RuleSet::default(), Threshold::default(), Box::new(MemorySink::new()))?;
    let mut queue: VecDeque<FeatureVector> = VecDeque::with_capacity(config.queue_capacity);
    let mut rows = Vec::with_capacity(config.batches);

    for (batch, chunk) in messages.chunks(config.batch_size).enumerate() {
        let wall = Instant::now();
        let cpu = ProcessTime::now();
        let mut processed = 0;
        for frames in chunk {
            let (ok, fv) = edge.ingest(frames);
            processed += ok as usize;
            if let Some(fv) = fv {
                if queue.len() == config.queue_capacity {
                    return Err(BenchError::QueueOverflow { batch });
                }
                queue.push_back(fv);
            }
        }
        while let Some(fv) = queue.pop_front() {
            fog.process_vector(&fv);
        }
        let cpu_ms = cpu.elapsed().as_secs_f64() * 1000.0;
        let wall_ms = wall.elapsed().as_secs_f64() * 1000.0;
        let utilization = if wall_ms > 0.0 { cpu_ms / wall_ms } else { 0.0 };
        rows.push(BatchRow { batch, messages: chunk.len(), processed, wall_ms, cpu_ms, utilization });
    }

    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let total_processed: usize = rows.iter().map(|r| r.processed).sum();
    let properties = vec![
        Property::new("batch_count", rows.len() == config.batches, format!("{} rows", rows.len())),
        Property::new("zero_loss", rows.iter().all(|r| r.processed == r.messages), String::new()),
        Property::new("conservation", total_processed == needed, format!("{total_processed} of {needed}")),
        Property::new(
            "utilization_within_cores",
            rows.iter().all(|r| (0.0..=cores as f64).contains(&r.utilization)),
            format!("{cores} cores"),
        ),
    ];
    Ok(ThroughputRun { rows, total_messages: needed, total_processed, alerts: fog.stats().alerts, cores, properties })
}
