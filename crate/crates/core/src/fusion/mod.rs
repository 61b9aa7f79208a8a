//! Fog-tier fusion: contextualize merged features, score them against the
//! weighted rule set and raise alerts for the ATC above a threshold.

mod alert;
mod context;
mod rules;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tracker::{FeatureMap, FeatureVector};

pub use alert::{
    Alert, AlertDispatcher, AlertSink, DispatchOutcome, DispatchPolicy, FileSink, MemorySink, SinkUnavailable,
    Suppression, WebhookSink,
};
pub use context::{contextualize, Context, GridConfig, TimeBand};
pub use rules::{Predicate, Rule, RuleSet};

pub const DEFAULT_THRESHOLD: f64 = 0.80;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("position {lat},{lon} is outside the sector grid")]
    SectorUnmapped { lat: f64, lon: f64 },
    #[error("configuration: {0}")]
    Config(String),
    #[error("threshold must be in (0, 1], got {0}")]
    BadThreshold(f64),
}

/// Operator-owned alert threshold in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self, FusionError> {
        if value > 0.0 && value <= 1.0 {
            Ok(Threshold(value))
        } else {
            Err(FusionError::BadThreshold(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold(DEFAULT_THRESHOLD)
    }
}

impl TryFrom<f64> for Threshold {
    type Error = FusionError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Threshold::new(value)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspicionReport {
    pub icao: String,
    pub first_seen: f64,
    pub score: f64,
    pub fired_rules: Vec<String>,
    pub context: Context,
    pub decided_at: f64,
}

/// Sum of the weights of the rules that fire, in rule-set order.
pub fn score(fv: &FeatureVector, ctx: &Context, rules: &RuleSet, decided_at: f64) -> SuspicionReport {
    let fired: Vec<&rules::Rule> = rules.rules().iter().filter(|r| r.predicate.holds(fv, ctx)).collect();
    let score = if fired.len() == rules.rules().len() {
        1.0
    } else {
        fired.iter().map(|r| r.weight).sum::<f64>().min(1.0)
    };
    SuspicionReport {
        icao: fv.icao.clone(),
        first_seen: fv.first_seen,
        score,
        fired_rules: fired.iter().map(|r| r.id.clone()).collect(),
        context: ctx.clone(),
        decided_at,
    }
}

/// Alert iff `score >= threshold`.
pub fn decide(report: &SuspicionReport, threshold: Threshold, rules: &RuleSet) -> Option<Alert> {
    if report.score < threshold.value() {
        return None;
    }
    let reasons: Vec<&str> = report
        .fired_rules
        .iter()
        .filter_map(|id| rules.get(id).map(|r| r.description.as_str()))
        .collect();
    Some(Alert {
        icao: report.icao.clone(),
        first_seen: report.first_seen,
        decided_at: report.decided_at,
        score: report.score,
        threshold: threshold.value(),
        message: format!(
            "suspicious activity {:.0}% for {} in sector {}: {}",
            report.score * 100.0,
            report.icao,
            report.context.sector_id,
            reasons.join("; ")
        ),
        sink_ack: false,
    })
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FogStats {
    pub scored: u64,
    pub unmapped: u64,
    pub alerts: u64,
    pub delivered: u64,
    pub suppressed: u64,
    pub dead_lettered: u64,
}

/// Fog analytics stage: every merged feature vector is contextualized at its
/// own report time, scored, and alerts are dispatched.
pub struct FogNode {
    pub grid: GridConfig,
    pub rules: RuleSet,
    pub threshold: Threshold,
    dispatcher: AlertDispatcher,
    stats: FogStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FogOutput {
    pub reports: Vec<SuspicionReport>,
    pub alerts: Vec<(Alert, DispatchOutcome)>,
}

impl FogNode {
    pub fn new(grid: GridConfig, rules: RuleSet, threshold: Threshold, dispatcher: AlertDispatcher) -> Result<Self, FusionError> {
        grid.validate()?;
        Ok(FogNode { grid, rules, threshold, dispatcher, stats: FogStats::default() })
    }

    pub fn stats(&self) -> FogStats {
        self.stats
    }

    pub fn dispatcher(&self) -> &AlertDispatcher {
        &self.dispatcher
    }

    pub fn process_vector(&mut self, fv: &FeatureVector) -> Option<(SuspicionReport, Option<(Alert, DispatchOutcome)>)> {
        let ctx = match contextualize(fv, fv.last_seen, &self.grid) {
            Ok(ctx) => ctx,
            Err(e) => {
                log::debug!("skipping {}: {e}", fv.icao);
                self.stats.unmapped += 1;
                return None;
            }
        };
        self.stats.scored += 1;
        let report = score(fv, &ctx, &self.rules, fv.last_seen);
        let dispatched = decide(&report, self.threshold, &self.rules).map(|alert| {
            self.stats.alerts += 1;
            let (alert, outcome) = self.dispatcher.dispatch(alert);
            match outcome {
                DispatchOutcome::Delivered => self.stats.delivered += 1,
                DispatchOutcome::Suppressed => self.stats.suppressed += 1,
                DispatchOutcome::DeadLettered => self.stats.dead_lettered += 1,
            }
            (alert, outcome)
        });
        Some((report, dispatched))
    }

    pub fn process(&mut self, map: &FeatureMap) -> FogOutput {
        let mut out = FogOutput { reports: Vec::new(), alerts: Vec::new() };
        for fv in map.entries.values() {
            if let Some((report, alert)) = self.process_vector(fv) {
                out.reports.push(report);
                out.alerts.extend(alert);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::AirspaceBox;
    use proptest::prelude::*;

    fn fv(implied: f64, gap: f64, heading: f64) -> FeatureVector {
        FeatureVector {
            icao: "ABCDEF".into(),
            first_seen: 1.0,
            speed_delta_kt: 0.0,
            heading_delta_deg: heading,
            vertical_rate_fpm: 0.0,
            implied_speed_kt: implied,
            report_gap_s: gap,
            window_len: 2,
            ground_speed_kt: 400.0,
            lat_deg: 52.0,
            lon_deg: 5.0,
            last_seen: 100.0,
        }
    }

    fn ctx(level: u8) -> Context {
        Context { time_band: TimeBand::Day, sector_id: "R0C0".into(), security_level: level }
    }

    #[test]
    fn nothing_fires_for_nominal_motion() {
        let r = score(&fv(400.0, 1.0, 2.0), &ctx(1), &RuleSet::default(), 1.0);
        assert_eq!(r.score, 0.0);
        assert!(r.fired_rules.is_empty());
    }

    #[test]
    fn everything_fires() {
        let r = score(&fv(40_000.0, 40.0, 120.0), &ctx(1), &RuleSet::default(), 1.0);
        assert_eq!(r.score, 1.0);
        assert_eq!(r.fired_rules, ["implied_speed", "report_gap", "heading_delta"]);
    }

    #[test]
    fn speed_and_gap_rules_score_085() {
        // implied speed 10x ground speed, 35 s gap, straight heading.
        let r = score(&fv(4000.0, 35.0, 0.0), &ctx(1), &RuleSet::default(), 1.0);
        assert_eq!(r.fired_rules, ["implied_speed", "report_gap"]);
        assert!((r.score - 0.85).abs() < 1e-12);
    }

    #[test]
    fn displacement_needing_far_longer_than_the_gap_is_a_timing_anomaly() {
        // 100 km covered in 1 s by a 450 kt aircraft needs ~432 s.
        let mut v = fv(194_384.0, 1.0, 0.0);
        v.ground_speed_kt = 450.0;
        let r = score(&v, &ctx(1), &RuleSet::default(), 1.0);
        assert_eq!(r.fired_rules, ["implied_speed", "report_gap"]);
    }

    #[test]
    fn security_level_three_halves_gap_threshold() {
        let rules = RuleSet::default();
        assert!(score(&fv(400.0, 20.0, 0.0), &ctx(2), &rules, 1.0).fired_rules.is_empty());
        assert_eq!(score(&fv(400.0, 20.0, 0.0), &ctx(3), &rules, 1.0).fired_rules, ["report_gap"]);
    }

    #[test]
    fn decide_is_inclusive() {
        let rules = RuleSet::default();
        let mut r = score(&fv(4000.0, 35.0, 0.0), &ctx(1), &rules, 1.0);
        let t = Threshold::new(0.80).unwrap();
        let alert = decide(&r, t, &rules).expect("0.85 >= 0.80");
        assert!(alert.message.contains("ABCDEF") && alert.message.contains("85%"));
        assert!(alert.message.contains("position jump"));
        r.score = 0.80;
        assert!(decide(&r, t, &rules).is_some());
        r.score = 0.0;
        assert!(decide(&r, Threshold::new(1e-9).unwrap(), &rules).is_none());
    }

    #[test]
    fn threshold_bounds() {
        assert!(Threshold::new(0.0).is_err());
        assert!(Threshold::new(1.0).is_ok());
        assert!(Threshold::new(1.01).is_err());
        assert!(serde_json::from_str::<Threshold>("1.5").is_err());
    }

    #[test]
    fn fog_node_dispatches_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let sink = FileSink::new(dir.path().join("alerts"));
        let dispatcher = AlertDispatcher::new(Box::new(sink), dir.path().join("dead"), DispatchPolicy::default());
        let grid = GridConfig::new(AirspaceBox { lat_min: 50.0, lat_max: 54.0, lon_min: 2.0, lon_max: 8.0 }, 2, 2);
        let mut node = FogNode::new(grid, RuleSet::default(), Threshold::default(), dispatcher).unwrap();
        let mut map = FeatureMap::default();
        map.entries.insert("1.000".into(), fv(4000.0, 35.0, 0.0));
        map.entries.insert("2.000".into(), FeatureVector { icao: "111111".into(), ..fv(400.0, 1.0, 0.0) });
        map.entries.insert("3.000".into(), FeatureVector { lat_deg: 10.0, ..fv(400.0, 1.0, 0.0) });
        let out = node.process(&map);
        assert_eq!(out.reports.len(), 2);
        assert_eq!(out.alerts.len(), 1);
        // Re-posting the same features does not re-alert.
        let again = node.process(&map);
        assert_eq!(again.alerts[0].1, DispatchOutcome::Suppressed);
        let s = node.stats();
        assert_eq!((s.scored, s.unmapped, s.delivered, s.suppressed), (4, 2, 1, 1));
    }

    fn arb_fv() -> impl Strategy<Value = FeatureVector> {
        (0.0f64..100_000.0, 0.0f64..120.0, -180.0f64..=180.0, 0.0f64..900.0, -50.0f64..50.0).prop_map(
            |(implied, gap, heading, gs, dspeed)| FeatureVector {
                ground_speed_kt: gs,
                speed_delta_kt: dspeed,
                ..fv(implied, gap, heading)
            },
        )
    }

    proptest! {
        #[test]
        fn score_is_sum_of_fired_weights_and_deterministic(v in arb_fv(), level in 1u8..=3) {
            let rules = RuleSet::default();
            let a = score(&v, &ctx(level), &rules, 1.0);
            prop_assert_eq!(&a, &score(&v, &ctx(level), &rules, 1.0));
            let sum: f64 = a.fired_rules.iter().map(|id| rules.get(id).unwrap().weight).sum();
            prop_assert!((a.score - sum).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.score));
        }

        #[test]
        fn threshold_monotone(v in arb_fv(), t1 in 0.01f64..=1.0, frac in 0.01f64..=1.0) {
            let rules = RuleSet::default();
            let r = score(&v, &ctx(1), &rules, 1.0);
            let t2 = t1 * frac;
            if decide(&r, Threshold::new(t1).unwrap(), &rules).is_some() {
                prop_assert!(decide(&r, Threshold::new(t2).unwrap(), &rules).is_some());
            }
        }

        #[test]
        fn adding_a_fired_rule_never_lowers_score(v in arb_fv(), extra_weight in 0.0f64..2.0) {
            let base = RuleSet::default();
            let mut rules = base.rules().to_vec();
            rules.push(Rule {
                id: "always".into(),
                description: "always".into(),
                weight: extra_weight,
                predicate: Predicate::VerticalRate { max_fpm: -1.0 },
            });
            // Compare with weights of the shared rules held fixed.
            let unnormalized_before: f64 = score(&v, &ctx(1), &base, 1.0).fired_rules.iter()
                .map(|id| base.get(id).unwrap().weight).sum();
            let total: f64 = rules.iter().map(|r| r.weight).sum();
            let extended = RuleSet::new(rules).unwrap();
            let after = score(&v, &ctx(1), &extended, 1.0).score * total;
            prop_assert!(after + 1e-9 >= unnormalized_before);
        }
    }
}
