//! End-to-end detection: simulator, edge tracker, feature transfer and fog
//! fusion in one process, reporting per attack and per untouched flight.
//!
//! ```text
//! cargo run --release --example detect_attacks
//! ```

use std::error::Error;

use adsb_trust::bench::{detect, run_scenario_e2e};
use adsb_trust::fusion::{RuleSet, Threshold};
use adsb_trust::sim::{nominal_scenario, spoof_scenario};

pub fn run() -> Result<(), Box<dyn Error>> {
    let rules = RuleSet::default();
    let spoof = run_scenario_e2e(&spoof_scenario(7), &rules, Threshold::default())?;
    for row in spoof.rows.iter().filter(|r| r.kind != "normal") {
        println!(
            "{} {}: fired {} after {:?} s, score {:?}",
            row.kind, row.subject, row.alert_fired, row.detection_latency_s, row.max_score
        );
    }
    for a in &spoof.alerts {
        println!("alert {} at t={} score {:.2}", a.icao, a.decided_at, a.score);
    }

    let quiet = detect(&nominal_scenario(100, 11, 120.0), &rules, Threshold::default())?;
    let noisy: Vec<_> = quiet.rows.iter().filter(|r| r.alert_fired).collect();
    println!("{} nominal records, {} flights with alerts", quiet.records, noisy.len());

    // Lowering the threshold below the implied-speed weight alone makes the
    // spoof visible to that rule only.
    let strict = run_scenario_e2e(&spoof_scenario(7), &rules, Threshold::new(0.5)?)?;
    println!("threshold 0.5: {} alerts", strict.alerts.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
