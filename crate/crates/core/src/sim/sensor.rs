use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::agent::{AgentState, AircraftAgent, Behavior};
use crate::codec::AdsbRecord;
use crate::geo::{destination, haversine_m, wrap_360};

pub const DEFAULT_MAX_RANGE_KM: f64 = 370.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Noise {
    pub position_m: f64,
    pub altitude_ft: f64,
    pub ground_speed_kt: f64,
    pub track_deg: f64,
    pub vertical_rate_fpm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub max_range_km: f64,
    pub dropout_prob: f64,
    pub noise: Noise,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel { lat_deg: 0.0, lon_deg: 0.0, max_range_km: DEFAULT_MAX_RANGE_KM, dropout_prob: 0.0, noise: Noise::default() }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err("dropout_prob must be in [0, 1)".into());
        }
        if !(self.max_range_km > 0.0) {
            return Err("max_range_km must be positive".into());
        }
        let n = &self.noise;
        if [n.position_m, n.altitude_ft, n.ground_speed_kt, n.track_deg, n.vertical_rate_fpm]
            .iter()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err("noise deviations must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn in_range(&self, lat: f64, lon: f64) -> bool {
        haversine_m(self.lat_deg, self.lon_deg, lat, lon) <= self.max_range_km * 1000.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    Emitted(AdsbRecord),
    OutOfRange,
    Dropped,
    /// Silent window, or a replay with no history old enough yet.
    Withheld,
}

/// Per-agent memory the sensor needs: ground truth history for replays and
/// the frozen spoof offset.
#[derive(Debug, Clone, Default)]
pub struct EmitterState {
    history: VecDeque<(f64, AgentState)>,
    spoof_bearing: Option<f64>,
}

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("sd checked").sample(rng)
}

/// Observes `agent` at its current clock. Randomness is drawn in a fixed
/// order (dropout, then each noise field) from the caller's seeded stream.
pub fn emit_report(agent: &AircraftAgent, mem: &mut EmitterState, sensor: &SensorModel, rng: &mut ChaCha8Rng) -> Emission {
    let t = agent.clock;
    mem.history.push_back((t, agent.state));
    let keep = match agent.behavior {
        Behavior::Replayed { delay_s } => delay_s + 2.0 * agent.report_period_s.max(1.0),
        _ => 0.0,
    };
    while mem.history.front().is_some_and(|(ht, _)| *ht < t - keep) {
        mem.history.pop_front();
    }

    if !sensor.in_range(agent.state.lat_deg, agent.state.lon_deg) {
        return Emission::OutOfRange;
    }
    let shown = match agent.behavior {
        Behavior::Normal => agent.state,
        Behavior::Silent { from, to } => {
            if t >= from && t < to {
                return Emission::Withheld;
            }
            agent.state
        }
        Behavior::Spoofed { jump_km, at_time } => {
            if t >= at_time {
                let bearing = *mem.spoof_bearing.get_or_insert(wrap_360(agent.state.track_deg + 90.0));
                let (lat, lon) = destination(agent.state.lat_deg, agent.state.lon_deg, bearing, jump_km * 1000.0);
                AgentState { lat_deg: lat, lon_deg: lon, ..agent.state }
            } else {
                agent.state
            }
        }
        Behavior::Replayed { delay_s } => {
            let target = t - delay_s + 1e-9;
            match mem.history.iter().rev().find(|(ht, _)| *ht <= target) {
                Some((_, s)) if t - delay_s >= -1e-9 => *s,
                _ => return Emission::Withheld,
            }
        }
    };
    if sensor.dropout_prob > 0.0 && rng.random::<f64>() < sensor.dropout_prob {
        return Emission::Dropped;
    }
    let n = &sensor.noise;
    let north = gauss(rng, n.position_m);
    let east = gauss(rng, n.position_m);
    let (mut lat, mut lon) = (shown.lat_deg, shown.lon_deg);
    if north != 0.0 || east != 0.0 {
        let bearing = east.atan2(north).to_degrees();
        (lat, lon) = destination(lat, lon, bearing, north.hypot(east));
    }
    let altitude = shown.altitude_ft + gauss(rng, n.altitude_ft);
    let speed = (shown.ground_speed_kt + gauss(rng, n.ground_speed_kt)).max(0.0);
    let track = wrap_360(shown.track_deg + gauss(rng, n.track_deg));
    let vr = shown.vertical_rate_fpm + gauss(rng, n.vertical_rate_fpm);
    Emission::Emitted(AdsbRecord {
        icao: agent.icao.clone(),
        callsign: agent.callsign.clone(),
        lat_deg: lat,
        lon_deg: lon,
        altitude_ft: altitude.round() as i32,
        ground_speed_kt: speed,
        track_deg: track,
        vertical_rate_fpm: vr.round() as i32,
        timestamp: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::agent::AgentSpec;
    use rand::SeedableRng;

    fn agent_at(lat: f64, lon: f64, behavior: Behavior) -> AircraftAgent {
        let mut a = AircraftAgent::new(AgentSpec {
            icao: "ABC123".into(),
            callsign: Some("TEST1".into()),
            state: AgentState { lat_deg: lat, lon_deg: lon, altitude_ft: 35000.0, ground_speed_kt: 450.0, track_deg: 90.0, vertical_rate_fpm: 0.0 },
            waypoints: vec![],
            behavior,
            report_period_s: 1.0,
        });
        a.clock = 1.0;
        a
    }

    #[test]
    fn beyond_line_of_sight_is_dropped() {
        // 400 km north of the receiver
        let (lat, lon) = destination(0.0, 0.0, 0.0, 400_000.0);
        let a = agent_at(lat, lon, Behavior::Normal);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(emit_report(&a, &mut EmitterState::default(), &SensorModel::default(), &mut rng), Emission::OutOfRange);
    }

    #[test]
    fn zero_noise_is_exact() {
        let a = agent_at(0.5, 0.5, Behavior::Normal);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let Emission::Emitted(r) = emit_report(&a, &mut EmitterState::default(), &SensorModel::default(), &mut rng) else {
            panic!("expected a record")
        };
        assert_eq!((r.lat_deg, r.lon_deg, r.altitude_ft, r.ground_speed_kt, r.track_deg), (0.5, 0.5, 35000, 450.0, 90.0));
        assert_eq!(r.timestamp, 1.0);
    }

    #[test]
    fn spoof_jump_implies_huge_speed() {
        let mut a = agent_at(0.5, 0.5, Behavior::Spoofed { jump_km: 100.0, at_time: 2.0 });
        let mut mem = EmitterState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sensor = SensorModel::default();
        let Emission::Emitted(before) = emit_report(&a, &mut mem, &sensor, &mut rng) else { panic!() };
        a.step(1.0);
        let Emission::Emitted(after) = emit_report(&a, &mut mem, &sensor, &mut rng) else { panic!() };
        let d = haversine_m(before.lat_deg, before.lon_deg, after.lat_deg, after.lon_deg);
        let kt = d / (after.timestamp - before.timestamp) / crate::geo::KT_TO_MPS;
        assert!(kt > 50_000.0, "{kt}");
    }
}
