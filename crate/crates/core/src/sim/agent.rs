use serde::{Deserialize, Serialize};

use crate::geo::{bearing_deg, destination, haversine_m, heading_delta, wrap_360, KT_TO_MPS, METRES_PER_NM};

pub const MAX_TURN_RATE_DEG_S: f64 = 3.0;
pub const CAPTURE_RADIUS_M: f64 = METRES_PER_NM;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub altitude_ft: f64,
    pub ground_speed_kt: f64,
    pub track_deg: f64,
    #[serde(default)]
    pub vertical_rate_fpm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    #[default]
    Normal,
    /// From `at_time` on, reported positions are displaced `jump_km`
    /// perpendicular to the track at the moment of the jump.
    Spoofed { jump_km: f64, at_time: f64 },
    /// Re-broadcasts the ground truth from `delay_s` ago.
    Replayed { delay_s: f64 },
    /// No reports in `[from, to)`.
    Silent { from: f64, to: f64 },
}

fn default_period() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub icao: String,
    #[serde(default)]
    pub callsign: Option<String>,
    pub state: AgentState,
    #[serde(default)]
    pub waypoints: Vec<Waypoint>,
    #[serde(default)]
    pub behavior: Behavior,
    #[serde(default = "default_period")]
    pub report_period_s: f64,
}

/// Kinematic aircraft on a spherical earth. An agent that has reached its
/// last waypoint holds position; one created without waypoints flies
/// straight along its track.
#[derive(Debug, Clone, PartialEq)]
pub struct AircraftAgent {
    pub icao: String,
    pub callsign: Option<String>,
    pub state: AgentState,
    pub waypoints: Vec<Waypoint>,
    pub behavior: Behavior,
    pub report_period_s: f64,
    pub clock: f64,
    pub arrived: bool,
}

impl AircraftAgent {
    pub fn new(spec: AgentSpec) -> Self {
        AircraftAgent {
            icao: spec.icao,
            callsign: spec.callsign,
            state: spec.state,
            waypoints: spec.waypoints,
            behavior: spec.behavior,
            report_period_s: spec.report_period_s,
            clock: 0.0,
            arrived: false,
        }
    }

    /// Advances by `dt_s`, in sub-steps of at most one second. Returns the
    /// waypoints captured during the step.
    pub fn step(&mut self, dt_s: f64) -> Vec<Waypoint> {
        assert!(dt_s > 0.0, "step needs a positive dt");
        let mut reached = Vec::new();
        let mut left = dt_s;
        while left > 1e-12 {
            let dt = left.min(1.0);
            left -= dt;
            self.clock += dt;
            if self.arrived {
                continue;
            }
            let s = &mut self.state;
            if let Some(wp) = self.waypoints.first() {
                let want = bearing_deg(s.lat_deg, s.lon_deg, wp.lat_deg, wp.lon_deg);
                let max_turn = MAX_TURN_RATE_DEG_S * dt;
                let turn = heading_delta(s.track_deg, want).clamp(-max_turn, max_turn);
                s.track_deg = wrap_360(s.track_deg + turn);
            }
            let (lat, lon) = destination(s.lat_deg, s.lon_deg, s.track_deg, s.ground_speed_kt * KT_TO_MPS * dt);
            s.lat_deg = lat;
            s.lon_deg = lon;
            s.altitude_ft += s.vertical_rate_fpm * dt / 60.0;
            if let Some(wp) = self.waypoints.first().copied() {
                if haversine_m(s.lat_deg, s.lon_deg, wp.lat_deg, wp.lon_deg) <= CAPTURE_RADIUS_M {
                    self.waypoints.remove(0);
                    reached.push(wp);
                    if self.waypoints.is_empty() {
                        self.arrived = true;
                    }
                }
            }
        }
        reached
    }
}
