use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{AgentSpec, AgentState, Behavior, Waypoint};
use super::feedback::FeedbackConfig;
use super::sensor::{Noise, SensorModel};
use super::SimError;
use crate::geo::destination;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Spoof,
    Replay,
    DosFlood,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackParams {
    pub jump_km: f64,
    pub at_time: f64,
    pub delay_s: f64,
    pub rate_per_s: f64,
    pub duration_s: f64,
    pub start_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Attack {
    Spoof { icao: String, jump_km: f64, at_time: f64 },
    Replay { icao: String, delay_s: f64 },
    DosFlood { rate_per_s: f64, duration_s: f64, start_s: f64 },
}

impl Attack {
    pub fn target(&self) -> Option<&str> {
        match self {
            Attack::Spoof { icao, .. } | Attack::Replay { icao, .. } => Some(icao),
            Attack::DosFlood { .. } => None,
        }
    }

    /// Number of flood messages, `rate * duration` rounded to the nearest
    /// whole message.
    pub fn burst_count(&self) -> u64 {
        match *self {
            Attack::DosFlood { rate_per_s, duration_s, .. } => (rate_per_s * duration_s).round() as u64,
            _ => 0,
        }
    }

    fn check(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::BadParams(m.to_string()));
        match *self {
            Attack::Spoof { jump_km, at_time, .. } => {
                if !(jump_km > 0.0 && jump_km.is_finite()) {
                    return bad("spoof jump_km must be positive");
                }
                if !(at_time >= 0.0 && at_time.is_finite()) {
                    return bad("spoof at_time must be non-negative");
                }
            }
            Attack::Replay { delay_s, .. } => {
                if !(delay_s > 0.0 && delay_s.is_finite()) {
                    return bad("replay delay_s must be positive");
                }
            }
            Attack::DosFlood { rate_per_s, duration_s, start_s } => {
                if !(rate_per_s > 0.0 && rate_per_s.is_finite()) {
                    return bad("dos_flood rate_per_s must be positive");
                }
                if !(duration_s > 0.0 && duration_s.is_finite()) {
                    return bad("dos_flood duration_s must be positive");
                }
                if !(start_s >= 0.0 && start_s.is_finite()) {
                    return bad("dos_flood start_s must be non-negative");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub horizon_s: f64,
    #[serde(default)]
    pub sensor: SensorModel,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub attacks: Vec<Attack>,
    #[serde(default)]
    pub feedback: Option<FeedbackConfig>,
}

impl Scenario {
    pub fn empty(horizon_s: f64) -> Self {
        Scenario { seed: 0, horizon_s, sensor: SensorModel::default(), agents: vec![], attacks: vec![], feedback: None }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.horizon_s >= 0.0 && self.horizon_s.is_finite()) {
            return Err(SimError::Scenario("horizon_s must be finite and non-negative".into()));
        }
        self.sensor.validate().map_err(SimError::Scenario)?;
        if let Some(fb) = &self.feedback {
            fb.validate().map_err(SimError::Scenario)?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.agents {
            if !seen.insert(a.icao.as_str()) {
                return Err(SimError::Scenario(format!("duplicate agent {}", a.icao)));
            }
            if !(a.report_period_s > 0.0 && a.report_period_s.is_finite()) {
                return Err(SimError::Scenario(format!("agent {} has a non-positive report period", a.icao)));
            }
        }
        for attack in &self.attacks {
            attack.check()?;
            if let Some(icao) = attack.target() {
                if !seen.contains(icao) {
                    return Err(SimError::UnknownAgent(icao.to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn agent(&self, icao: &str) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.icao == icao)
    }

    /// Agent specs with spoof and replay attacks folded into their behavior.
    pub fn effective_agents(&self) -> Vec<AgentSpec> {
        let mut agents = self.agents.clone();
        for attack in &self.attacks {
            let behavior = match *attack {
                Attack::Spoof { jump_km, at_time, .. } => Behavior::Spoofed { jump_km, at_time },
                Attack::Replay { delay_s, .. } => Behavior::Replayed { delay_s },
                Attack::DosFlood { .. } => continue,
            };
            if let Some(a) = agents.iter_mut().find(|a| Some(a.icao.as_str()) == attack.target()) {
                a.behavior = behavior;
            }
        }
        agents
    }
}

/// Adds an attack to the scenario. `subject` names the target agent for
/// spoof and replay and is ignored for floods.
pub fn inject_attack(mut scenario: Scenario, kind: AttackKind, subject: &str, p: AttackParams) -> Result<Scenario, SimError> {
    let attack = match kind {
        AttackKind::Spoof => Attack::Spoof { icao: subject.to_string(), jump_km: p.jump_km, at_time: p.at_time },
        AttackKind::Replay => Attack::Replay { icao: subject.to_string(), delay_s: p.delay_s },
        AttackKind::DosFlood => Attack::DosFlood { rate_per_s: p.rate_per_s, duration_s: p.duration_s, start_s: p.start_s },
    };
    if let Some(icao) = attack.target() {
        if scenario.agent(icao).is_none() {
            return Err(SimError::UnknownAgent(icao.to_string()));
        }
    }
    attack.check()?;
    scenario.attacks.push(attack);
    Ok(scenario)
}

pub const RECEIVER: (f64, f64) = (47.0, 8.0);

/// `n` cruising flights inside receiver coverage. Each starts within 150 km
/// of the receiver on a random track and flies two gentle waypoints.
pub fn nominal_scenario(n: usize, seed: u64, horizon_s: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rlat, rlon) = RECEIVER;
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let (lat, lon) = destination(rlat, rlon, rng.random_range(0.0..360.0), rng.random_range(0.0..150_000.0));
        let track: f64 = rng.random_range(0.0..360.0);
        let speed = rng.random_range(250.0..480.0);
        let leg = speed * crate::geo::KT_TO_MPS * horizon_s.max(60.0) / 2.0;
        let wp1 = destination(lat, lon, track + rng.random_range(-30.0..30.0), leg);
        let wp2 = destination(wp1.0, wp1.1, track + rng.random_range(-30.0..30.0), leg);
        agents.push(AgentSpec {
            icao: format!("{:06X}", 0x400000 + i),
            callsign: Some(format!("SIM{i:04}")),
            state: AgentState {
                lat_deg: lat,
                lon_deg: lon,
                altitude_ft: rng.random_range(180.0..400.0_f64).round() * 100.0,
                ground_speed_kt: speed,
                track_deg: track,
                vertical_rate_fpm: 0.0,
            },
            waypoints: vec![
                Waypoint { lat_deg: wp1.0, lon_deg: wp1.1 },
                Waypoint { lat_deg: wp2.0, lon_deg: wp2.1 },
            ],
            behavior: Behavior::Normal,
            report_period_s: 1.0,
        });
    }
    Scenario {
        seed,
        horizon_s,
        sensor: SensorModel {
            lat_deg: rlat,
            lon_deg: rlon,
            noise: Noise { position_m: 5.0, altitude_ft: 10.0, ground_speed_kt: 1.0, track_deg: 0.2, vertical_rate_fpm: 10.0 },
            ..SensorModel::default()
        },
        agents,
        attacks: vec![],
        feedback: None,
    }
}

/// Ten nominal flights; the first one is spoofed with a 100 km jump at
/// `t = 60`.
pub fn spoof_scenario(seed: u64) -> Scenario {
    let base = nominal_scenario(10, seed, 180.0);
    let target = base.agents[0].icao.clone();
    inject_attack(base, AttackKind::Spoof, &target, AttackParams { jump_km: 100.0, at_time: 60.0, ..AttackParams::default() })
        .expect("default spoof is well formed")
}
