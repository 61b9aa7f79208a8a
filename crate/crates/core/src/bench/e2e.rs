use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{fog_node, BenchError, Property};
use crate::codec::AdsbRecord;
use crate::fusion::{FogNode, MemorySink, RuleSet, Threshold};
use crate::sim::{run_with, Attack, EmittedCount, RecordSink, Scenario};
use crate::tracker::{extract_features, parse_features, serialize_features, FeatureMap, TrackStore, TrackerConfig, UpdateOutcome};

/// One alert as the fog tier raised it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaisedAlert {
    pub icao: String,
    pub decided_at: f64,
    pub score: f64,
}

/// Verdict for one injected attack or one untouched flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub subject: String,
    pub kind: String,
    pub at_time: Option<f64>,
    pub alert_fired: bool,
    pub alerts: usize,
    pub first_alert_t: Option<f64>,
    pub max_score: Option<f64>,
    /// Simulated seconds from attack onset to the first alert.
    pub detection_latency_s: Option<f64>,
    pub report_period_s: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct E2eRun {
    pub rows: Vec<VerdictRow>,
    pub alerts: Vec<RaisedAlert>,
    pub records: usize,
    pub bursts: u64,
    pub properties: Vec<Property>,
}

/// Edge and fog tiers fed straight from the simulator. Every record is
/// tracked, its feature vector crosses the wire format, and the fog node
/// scores it at the record time.
struct Pipeline {
    tracks: TrackStore,
    fog: FogNode,
    alerts: Vec<RaisedAlert>,
    wire_errors: usize,
}

impl RecordSink for Pipeline {
    fn record(&mut self, _t: f64, record: &AdsbRecord) {
        let Ok(UpdateOutcome::Appended { .. }) = self.tracks.update(record) else { return };
        let Some(track) = self.tracks.get(&record.icao) else { return };
        let Ok(fv) = extract_features(track) else { return };
        let doc = serialize_features(&FeatureMap { entries: [(track.key.clone(), fv)].into() });
        let map = match parse_features(&doc) {
            Ok(m) => m,
            Err(e) => {
                log::error!("feature document rejected: {e}");
                self.wire_errors += 1;
                return;
            }
        };
        for (alert, _) in self.fog.process(&map).alerts {
            self.alerts.push(RaisedAlert { icao: alert.icao, decided_at: alert.decided_at, score: alert.score });
        }
    }
}

/// Runs the scenario through the full pipeline and reports, per attack and
/// per untouched flight, what the fog tier raised.
pub fn detect(scenario: &Scenario, rules: &RuleSet, threshold: Threshold) -> Result<E2eRun, BenchError> {
    let fog = fog_node(rules.clone(), threshold, Box::new(MemorySink::new()))?;
    let mut pipe = Pipeline { tracks: TrackStore::new(TrackerConfig::default()), fog, alerts: Vec::new(), wire_errors: 0 };
    let out = run_with(scenario, &mut pipe, &mut EmittedCount).map_err(|e| BenchError::Scenario(e.to_string()))?;

    let mut by_icao: BTreeMap<&str, Vec<&RaisedAlert>> = BTreeMap::new();
    for a in &pipe.alerts {
        by_icao.entry(a.icao.as_str()).or_default().push(a);
    }
    let period = |icao: &str| scenario.agent(icao).map(|a| a.report_period_s);
    let mut rows = Vec::new();
    let mut properties = Vec::new();
    for attack in &scenario.attacks {
        let row = match attack {
            Attack::Spoof { icao, at_time, .. } | Attack::Replay { icao, delay_s: at_time } => {
                let kind = if matches!(attack, Attack::Spoof { .. }) { "spoof" } else { "replay" };
                let onset = if kind == "spoof" { *at_time } else { 0.0 };
                let hits: Vec<&RaisedAlert> =
                    by_icao.get(icao.as_str()).map(|v| v.iter().copied().filter(|a| a.decided_at >= onset).collect()).unwrap_or_default();
                let first = hits.first().map(|a| a.decided_at);
                VerdictRow {
                    subject: icao.clone(),
                    kind: kind.into(),
                    at_time: Some(onset),
                    alert_fired: !hits.is_empty(),
                    alerts: hits.len(),
                    first_alert_t: first,
                    max_score: hits.iter().map(|a| a.score).reduce(f64::max),
                    detection_latency_s: first.map(|t| t - onset),
                    report_period_s: period(icao),
                }
            }
            Attack::DosFlood { start_s, .. } => VerdictRow {
                subject: "dos_flood".into(),
                kind: "dos_flood".into(),
                at_time: Some(*start_s),
                alert_fired: false,
                alerts: 0,
                first_alert_t: None,
                max_score: None,
                detection_latency_s: None,
                report_period_s: None,
            },
        };
        if row.kind == "spoof" {
            let bound = 2.0 * row.report_period_s.unwrap_or(1.0);
            let ok = row.detection_latency_s.is_some_and(|d| d <= bound)
                && row.max_score.is_some_and(|s| s >= threshold.value());
            properties.push(Property::new(
                &format!("spoof_{}_detected_within_2_periods", row.subject),
                ok,
                format!("latency {:?} s, score {:?}", row.detection_latency_s, row.max_score),
            ));
        }
        rows.push(row);
    }

    let attacked: Vec<&str> = scenario.attacks.iter().filter_map(Attack::target).collect();
    let mut normal_alerts = 0;
    for agent in scenario.agents.iter().filter(|a| !attacked.contains(&a.icao.as_str())) {
        let hits = by_icao.get(agent.icao.as_str()).map(Vec::len).unwrap_or(0);
        normal_alerts += hits;
        rows.push(VerdictRow {
            subject: agent.icao.clone(),
            kind: "normal".into(),
            at_time: None,
            alert_fired: hits > 0,
            alerts: hits,
            first_alert_t: by_icao.get(agent.icao.as_str()).and_then(|v| v.first()).map(|a| a.decided_at),
            max_score: by_icao.get(agent.icao.as_str()).and_then(|v| v.iter().map(|a| a.score).reduce(f64::max)),
            detection_latency_s: None,
            report_period_s: Some(agent.report_period_s),
        });
    }
    properties.push(Property::new("normal_flights_silent", normal_alerts == 0, format!("{normal_alerts} alerts")));
    properties.push(Property::new("feature_wire_clean", pipe.wire_errors == 0, format!("{} rejects", pipe.wire_errors)));

    Ok(E2eRun { rows, alerts: pipe.alerts, records: out.records.len(), bursts: out.counters.bursts, properties })
}

/// [`detect`] for scenarios that must carry at least one attack.
pub fn run_scenario_e2e(scenario: &Scenario, rules: &RuleSet, threshold: Threshold) -> Result<E2eRun, BenchError> {
    if scenario.attacks.is_empty() {
        return Err(BenchError::Scenario("scenario has no attack to detect".into()));
    }
    detect(scenario, rules, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{inject_attack, nominal_scenario, spoof_scenario, AttackKind, AttackParams};

    #[test]
    fn empty_attack_list_is_a_scenario_error() {
        let err = run_scenario_e2e(&nominal_scenario(2, 1, 10.0), &RuleSet::default(), Threshold::default()).unwrap_err();
        assert!(matches!(err, BenchError::Scenario(_)));
    }

    #[test]
    fn spoof_fires_on_the_jump_report() {
        let run = run_scenario_e2e(&spoof_scenario(7), &RuleSet::default(), Threshold::default()).unwrap();
        let spoof = &run.rows[0];
        assert_eq!(spoof.kind, "spoof");
        assert!(spoof.alert_fired);
        assert!(spoof.detection_latency_s.unwrap() <= 2.0);
        assert!(spoof.max_score.unwrap() >= 0.80);
        assert!(run.properties.iter().all(|p| p.holds), "{:?}", run.properties);
        assert_eq!(run.rows.iter().filter(|r| r.kind == "normal").count(), 9);
    }

    #[test]
    fn flood_rows_are_reported_without_alerts() {
        let s = inject_attack(
            spoof_scenario(3),
            AttackKind::DosFlood,
            "",
            AttackParams { rate_per_s: 10.0, duration_s: 2.0, start_s: 5.0, ..AttackParams::default() },
        )
        .unwrap();
        let run = run_scenario_e2e(&s, &RuleSet::default(), Threshold::default()).unwrap();
        assert_eq!(run.bursts, 20);
        let flood = run.rows.iter().find(|r| r.kind == "dos_flood").unwrap();
        assert!(!flood.alert_fired);
    }
}
