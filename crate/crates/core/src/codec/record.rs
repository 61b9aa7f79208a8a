use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::cpr::{cpr_decode_global, CprFrame, Parity};
use super::frame::{DecodedMessage, Payload};
use super::CodecError;

/// Canonical aircraft state report exchanged between tiers.
///
/// Field order is the JSON key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdsbRecord {
    pub icao: String,
    pub callsign: Option<String>,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub altitude_ft: i32,
    pub ground_speed_kt: f64,
    pub track_deg: f64,
    pub vertical_rate_fpm: i32,
    pub timestamp: f64,
}

impl AdsbRecord {
    pub fn validate(&self) -> Result<(), CodecError> {
        if self.icao.len() != 6 || !self.icao.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(CodecError::Malformed("icao must be 6 hex characters"));
        }
        if !(self.lat_deg.is_finite() && (-90.0..=90.0).contains(&self.lat_deg)) {
            return Err(CodecError::Range("latitude outside [-90, 90]"));
        }
        if !(self.lon_deg.is_finite() && self.lon_deg > -180.0 && self.lon_deg <= 180.0) {
            return Err(CodecError::Range("longitude outside (-180, 180]"));
        }
        if !(self.ground_speed_kt.is_finite() && self.ground_speed_kt >= 0.0) {
            return Err(CodecError::Range("ground speed must be non-negative"));
        }
        if !(self.track_deg.is_finite() && (0.0..360.0).contains(&self.track_deg)) {
            return Err(CodecError::Range("track outside [0, 360)"));
        }
        if !(self.timestamp.is_finite() && self.timestamp > 0.0) {
            return Err(CodecError::Range("timestamp must be positive"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[derive(Debug, Default, Clone)]
struct AircraftState {
    callsign: Option<String>,
    even: Option<CprFrame>,
    odd: Option<CprFrame>,
    altitude_ft: Option<i32>,
    velocity: Option<(f64, f64, i32)>,
}

/// Folds decoded messages into [`AdsbRecord`]s.
///
/// A record is produced whenever a position frame completes a fresh CPR pair
/// and a velocity report has already been seen for the aircraft.
#[derive(Debug, Default)]
pub struct RecordAssembler {
    aircraft: HashMap<String, AircraftState>,
}

impl RecordAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, msg: &DecodedMessage) -> Option<AdsbRecord> {
        let state = self.aircraft.entry(msg.icao.clone()).or_default();
        match &msg.payload {
            Payload::Identification { callsign } => {
                state.callsign = Some(callsign.clone());
                None
            }
            Payload::AirborneVelocity { ground_speed_kt, track_deg, vertical_rate_fpm } => {
                state.velocity = Some((*ground_speed_kt, *track_deg, *vertical_rate_fpm));
                None
            }
            Payload::AirbornePosition { cpr, altitude_ft } => {
                match cpr.parity {
                    Parity::Even => state.even = Some(*cpr),
                    Parity::Odd => state.odd = Some(*cpr),
                }
                state.altitude_ft = Some(*altitude_ft);
                let (even, odd) = (state.even?, state.odd?);
                let (lat_deg, lon_deg) = cpr_decode_global(&even, &odd).ok()?;
                let (ground_speed_kt, track_deg, vertical_rate_fpm) = state.velocity?;
                Some(AdsbRecord {
                    icao: msg.icao.clone(),
                    callsign: state.callsign.clone(),
                    lat_deg,
                    lon_deg,
                    altitude_ft: *altitude_ft,
                    ground_speed_kt,
                    track_deg,
                    vertical_rate_fpm,
                    timestamp: msg.received_at,
                })
            }
            Payload::Unsupported => None,
        }
    }
}
