use serde::{Deserialize, Serialize};

use super::context::{Context, TimeBand};
use super::FusionError;
use crate::tracker::FeatureVector;

/// Predicate families a rule can use. Thresholds live in the config so the
/// operator can retune them without code changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    /// Position-derived speed exceeds `ratio` times the reported ground speed
    /// (ground speed floored at `floor_kt`).
    ImpliedSpeed { ratio: f64, floor_kt: f64 },
    /// Report timing anomaly. Fires when the gap itself exceeds `max_gap_s`,
    /// or when covering the observed displacement at the reported ground
    /// speed would take more than `max_gap_s` longer than the gap. Security
    /// level 3 halves `max_gap_s`.
    ReportGap { max_gap_s: f64, floor_kt: f64 },
    /// Absolute heading change between consecutive reports above `max_deg`.
    HeadingDelta { max_deg: f64 },
    /// Absolute ground speed change above `max_kt`.
    SpeedDelta { max_kt: f64 },
    /// Absolute vertical rate above `max_fpm`.
    VerticalRate { max_fpm: f64 },
    /// Any activity during the night band in a sector at or above `min_level`.
    NightActivity { min_level: u8 },
}

impl Predicate {
    pub fn holds(&self, fv: &FeatureVector, ctx: &Context) -> bool {
        match *self {
            Predicate::ImpliedSpeed { ratio, floor_kt } => {
                fv.implied_speed_kt > ratio * fv.ground_speed_kt.max(floor_kt)
            }
            Predicate::ReportGap { max_gap_s, floor_kt } => {
                let limit = if ctx.security_level >= 3 { max_gap_s / 2.0 } else { max_gap_s };
                let displacement_kt_s = fv.implied_speed_kt * fv.report_gap_s;
                let needed_s = displacement_kt_s / fv.ground_speed_kt.max(floor_kt);
                fv.report_gap_s > limit || needed_s - fv.report_gap_s > limit
            }
            Predicate::HeadingDelta { max_deg } => fv.heading_delta_deg.abs() > max_deg,
            Predicate::SpeedDelta { max_kt } => fv.speed_delta_kt.abs() > max_kt,
            Predicate::VerticalRate { max_fpm } => fv.vertical_rate_fpm.abs() > max_fpm,
            Predicate::NightActivity { min_level } => {
                ctx.time_band == TimeBand::Night && ctx.security_level >= min_level
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub description: String,
    pub weight: f64,
    pub predicate: Predicate,
}

/// An active rule set whose weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    /// Validates ids and weights and renormalizes the weights.
    pub fn new(mut rules: Vec<Rule>) -> Result<Self, FusionError> {
        if rules.is_empty() {
            return Err(FusionError::Config("rule set is empty".into()));
        }
        let mut ids: Vec<&str> = rules.iter().map(|r| r.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(FusionError::Config("duplicate rule id".into()));
        }
        if rules.iter().any(|r| !r.weight.is_finite() || r.weight < 0.0) {
            return Err(FusionError::Config("rule weights must be finite and non-negative".into()));
        }
        let total: f64 = rules.iter().map(|r| r.weight).sum();
        if total <= 0.0 {
            return Err(FusionError::Config("rule weights sum to zero".into()));
        }
        for rule in &mut rules {
            rule.weight /= total;
        }
        Ok(RuleSet { rules })
    }

    pub fn from_json(text: &str) -> Result<Self, FusionError> {
        let rules: Vec<Rule> = serde_json::from_str(text).map_err(|e| FusionError::Config(e.to_string()))?;
        Self::new(rules)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn get(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Replaces one rule's weight and renormalizes the set.
    pub fn reweight(&self, id: &str, weight: f64) -> Result<Self, FusionError> {
        let mut rules = self.rules.clone();
        let rule = rules
            .iter_mut()
            .find(|r| r.id == id)
            .ok_or_else(|| FusionError::Config(format!("unknown rule {id}")))?;
        rule.weight = weight;
        Self::new(rules)
    }
}

impl Default for RuleSet {
    /// Implied-speed (0.5), report-gap (0.35) and heading-delta (0.15).
    fn default() -> Self {
        RuleSet::new(vec![
            Rule {
                id: "implied_speed".into(),
                description: "position jump implies a speed far above the reported ground speed".into(),
                weight: 0.5,
                predicate: Predicate::ImpliedSpeed { ratio: 3.0, floor_kt: 50.0 },
            },
            Rule {
                id: "report_gap".into(),
                description: "report timing inconsistent with motion (coverage gap or displacement needing far longer than the gap)".into(),
                weight: 0.35,
                predicate: Predicate::ReportGap { max_gap_s: 30.0, floor_kt: 50.0 },
            },
            Rule {
                id: "heading_delta".into(),
                description: "heading changed by more than 90 degrees between consecutive reports".into(),
                weight: 0.15,
                predicate: Predicate::HeadingDelta { max_deg: 90.0 },
            },
        ])
        .expect("default rule set is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_normalized() {
        let rs = RuleSet::default();
        let total: f64 = rs.rules().iter().map(|r| r.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(rs.get("implied_speed").unwrap().weight, 0.5);
        let rs = rs.reweight("heading_delta", 0.65).unwrap();
        assert!((rs.get("implied_speed").unwrap().weight - 0.5 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(RuleSet::new(vec![]).is_err());
        let mut rules = RuleSet::default().rules().to_vec();
        rules[1].id = rules[0].id.clone();
        assert!(RuleSet::new(rules).is_err());
        let mut rules = RuleSet::default().rules().to_vec();
        rules[0].weight = -1.0;
        assert!(RuleSet::new(rules).is_err());
    }

    #[test]
    fn json_config_round_trip() {
        let text = serde_json::to_string(RuleSet::default().rules()).unwrap();
        assert_eq!(RuleSet::from_json(&text).unwrap(), RuleSet::default());
        let custom = r#"[{"id":"vr","description":"steep","weight":2,"predicate":{"kind":"vertical_rate","max_fpm":6000}}]"#;
        assert_eq!(RuleSet::from_json(custom).unwrap().rules()[0].weight, 1.0);
    }
}
