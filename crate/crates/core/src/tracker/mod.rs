//! Edge-tier track bookkeeping.
//!
//! Records are associated to tracks by ICAO address. Each track keeps a
//! bounded FIFO of its most recent points inside the configured airspace box
//! and is keyed downstream by the time it was first detected.

mod features;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::AdsbRecord;

pub use features::{extract_features, parse_features, serialize_features, FeatureMap, FeatureVector};

pub const DEFAULT_WINDOW: usize = 32;
pub const DEFAULT_TTL_S: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("record for {icao} at {timestamp} is not after the last point at {last}")]
    OutOfOrderRecord { icao: String, timestamp: f64, last: f64 },
    #[error("record for {0} is outside the airspace box and no track exists")]
    OutOfBoxIgnored(String),
    #[error("track needs at least two points, has {0}")]
    InsufficientHistory(usize),
    #[error("feature document: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirspaceBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl AirspaceBox {
    pub const WORLD: AirspaceBox = AirspaceBox {
        lat_min: -90.0,
        lat_max: 90.0,
        lon_min: -180.0,
        lon_max: 180.0,
    };

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.lat_min..=self.lat_max).contains(&lat) && (self.lon_min..=self.lon_max).contains(&lon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub timestamp: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub altitude_ft: i32,
    pub ground_speed_kt: f64,
    pub track_deg: f64,
    pub vertical_rate_fpm: i32,
}

impl From<&AdsbRecord> for TrackPoint {
    fn from(r: &AdsbRecord) -> Self {
        TrackPoint {
            timestamp: r.timestamp,
            lat_deg: r.lat_deg,
            lon_deg: r.lon_deg,
            altitude_ft: r.altitude_ft,
            ground_speed_kt: r.ground_speed_kt,
            track_deg: r.track_deg,
            vertical_rate_fpm: r.vertical_rate_fpm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub icao: String,
    pub first_seen: f64,
    /// Feature-map key: first detection time, suffixed on collision.
    pub key: String,
    pub points: VecDeque<TrackPoint>,
    pub capacity: usize,
    pub airspace: AirspaceBox,
}

impl Track {
    pub fn last(&self) -> Option<&TrackPoint> {
        self.points.back()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloseReason {
    LeftAirspace,
    Stale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackClosed {
    pub icao: String,
    pub key: String,
    pub reason: CloseReason,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Created,
    Appended { evicted: bool },
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub window: usize,
    pub ttl_s: f64,
    pub airspace: AirspaceBox,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            window: DEFAULT_WINDOW,
            ttl_s: DEFAULT_TTL_S,
            airspace: AirspaceBox::WORLD,
        }
    }
}

/// Record accounting: every record offered to [`TrackStore::update`] ends up
/// in exactly one of live points, evicted or rejected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrackCounters {
    pub offered: u64,
    /// Points pushed out of a full window or dropped with a closed track.
    pub evicted: u64,
    /// Out-of-order, out-of-box or track-closing records.
    pub rejected: u64,
}

#[derive(Debug, Clone)]
pub struct TrackStore {
    config: TrackerConfig,
    tracks: HashMap<String, Track>,
    used_keys: HashSet<String>,
    counters: TrackCounters,
    closed: Vec<TrackClosed>,
}

impl TrackStore {
    pub fn new(config: TrackerConfig) -> Self {
        assert!(config.window >= 1, "track window must hold at least one point");
        TrackStore {
            config,
            tracks: HashMap::new(),
            used_keys: HashSet::new(),
            counters: TrackCounters::default(),
            closed: Vec::new(),
        }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn get(&self, icao: &str) -> Option<&Track> {
        self.tracks.get(icao)
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn tracks(&self) -> impl Iterator<Item = &Track> {
        self.tracks.values()
    }

    pub fn counters(&self) -> TrackCounters {
        self.counters
    }

    pub fn live_points(&self) -> usize {
        self.tracks.values().map(|t| t.points.len()).sum()
    }

    /// Drains the track-closed events emitted since the last call.
    pub fn take_closed(&mut self) -> Vec<TrackClosed> {
        std::mem::take(&mut self.closed)
    }

    pub fn update(&mut self, record: &AdsbRecord) -> Result<UpdateOutcome, TrackError> {
        self.counters.offered += 1;
        let inside = self.config.airspace.contains(record.lat_deg, record.lon_deg);
        let Some(track) = self.tracks.get_mut(&record.icao) else {
            if !inside {
                self.counters.rejected += 1;
                return Err(TrackError::OutOfBoxIgnored(record.icao.clone()));
            }
            let key = self.allocate_key(record.timestamp, &record.icao);
            let mut points = VecDeque::with_capacity(self.config.window);
            points.push_back(TrackPoint::from(record));
            self.tracks.insert(
                record.icao.clone(),
                Track {
                    icao: record.icao.clone(),
                    first_seen: record.timestamp,
                    key,
                    points,
                    capacity: self.config.window,
                    airspace: self.config.airspace,
                },
            );
            return Ok(UpdateOutcome::Created);
        };

        let last = track.last().map(|p| p.timestamp).unwrap_or(f64::NEG_INFINITY);
        if record.timestamp <= last {
            self.counters.rejected += 1;
            return Err(TrackError::OutOfOrderRecord {
                icao: record.icao.clone(),
                timestamp: record.timestamp,
                last,
            });
        }
        if !inside {
            self.counters.rejected += 1;
            self.close(&record.icao.clone(), CloseReason::LeftAirspace);
            return Ok(UpdateOutcome::Closed);
        }
        track.points.push_back(TrackPoint::from(record));
        let evicted = track.points.len() > track.capacity;
        if evicted {
            track.points.pop_front();
            self.counters.evicted += 1;
        }
        Ok(UpdateOutcome::Appended { evicted })
    }

    /// Removes tracks whose last report is more than `ttl_s` before `now`.
    pub fn evict_stale(&mut self, now: f64, ttl_s: f64) -> Vec<TrackClosed> {
        assert!(ttl_s > 0.0, "ttl must be positive");
        let mut stale: Vec<String> = self
            .tracks
            .values()
            .filter(|t| t.last().is_some_and(|p| now - p.timestamp > ttl_s))
            .map(|t| t.icao.clone())
            .collect();
        stale.sort();
        stale
            .iter()
            .filter_map(|icao| self.close(icao, CloseReason::Stale))
            .collect()
    }

    fn close(&mut self, icao: &str, reason: CloseReason) -> Option<TrackClosed> {
        let track = self.tracks.remove(icao)?;
        self.counters.evicted += track.points.len() as u64;
        let event = TrackClosed {
            icao: track.icao,
            key: track.key,
            reason,
            points: track.points.len(),
        };
        self.closed.push(event.clone());
        Some(event)
    }

    fn allocate_key(&mut self, first_seen: f64, icao: &str) -> String {
        let base = format!("{first_seen:.3}");
        let mut key = base.clone();
        if self.used_keys.contains(&key) {
            key = format!("{base}-{icao}");
            let mut n = 2;
            while self.used_keys.contains(&key) {
                key = format!("{base}-{icao}-{n}");
                n += 1;
            }
        }
        self.used_keys.insert(key.clone());
        key
    }

    /// Features for every live track with enough history.
    pub fn feature_map(&self) -> FeatureMap {
        let entries: BTreeMap<String, FeatureVector> = self
            .tracks
            .values()
            .filter_map(|t| extract_features(t).ok().map(|fv| (t.key.clone(), fv)))
            .collect();
        FeatureMap { entries }
    }
}
