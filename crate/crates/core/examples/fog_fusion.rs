//! Fog tier: contextualize feature vectors on a sector grid, score them
//! against the weighted rule set and dispatch alerts above the threshold.
//!
//! ```text
//! cargo run --example fog_fusion
//! ```

use std::error::Error;

use adsb_trust::fusion::{AlertDispatcher, DispatchPolicy, FogNode, GridConfig, MemorySink, RuleSet, Threshold};
use adsb_trust::tracker::{AirspaceBox, FeatureVector};

fn vector(icao: &str, implied_speed_kt: f64, report_gap_s: f64, t: f64) -> FeatureVector {
    FeatureVector {
        icao: icao.into(),
        first_seen: 1.0,
        speed_delta_kt: 0.0,
        heading_delta_deg: 0.4,
        vertical_rate_fpm: 0.0,
        implied_speed_kt,
        report_gap_s,
        window_len: 12,
        ground_speed_kt: 430.0,
        lat_deg: 47.2,
        lon_deg: 8.3,
        last_seen: t,
    }
}

pub fn run() -> Result<(), Box<dyn Error>> {
    let rules = RuleSet::default();
    for r in rules.rules() {
        println!("rule {} weight {}", r.id, r.weight);
    }
    let grid = GridConfig::new(AirspaceBox { lat_min: 45.0, lat_max: 49.0, lon_min: 5.0, lon_max: 11.0 }, 4, 6);
    let dead_letter = std::env::temp_dir().join("fog_fusion_example_dead_letter.ndjson");
    let dispatcher = AlertDispatcher::new(Box::new(MemorySink::new()), dead_letter, DispatchPolicy::default());
    let mut fog = FogNode::new(grid, rules, Threshold::default(), dispatcher)?;

    let stream = [
        vector("4B1805", 431.0, 1.0, 10.0),
        vector("4B1805", 194_000.0, 1.0, 11.0),
        vector("4B1805", 195_000.0, 1.0, 12.0),
        vector("4D2231", 440.0, 45.0, 12.0),
    ];
    for fv in &stream {
        match fog.process_vector(fv) {
            Some((report, alert)) => {
                println!("{} t={} score {:.2} fired {:?}", fv.icao, fv.last_seen, report.score, report.fired_rules);
                if let Some((alert, outcome)) = alert {
                    println!("  alert: {} ({outcome:?})", alert.message);
                }
            }
            None => println!("{} outside the grid", fv.icao),
        }
    }
    println!("{:?}", fog.stats());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
