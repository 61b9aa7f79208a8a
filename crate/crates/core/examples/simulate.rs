//! Discrete-event traffic simulation: nominal flights, a spoofed position
//! jump, a replayed stream and a message flood. With `--write DIR` the
//! scenarios are saved as JSON for the `bench` binary.
//!
//! ```text
//! cargo run --example simulate -- --write examples/scenarios
//! ```

use std::error::Error;
use std::path::Path;

use adsb_trust::sim::{
    self, inject_attack, nominal_scenario, spoof_scenario, AttackKind, AttackParams, EventKind, FeedbackConfig, Scenario,
};

pub fn scenarios() -> Result<Vec<(&'static str, Scenario)>, Box<dyn Error>> {
    let nominal = nominal_scenario(100, 11, 120.0);
    let spoof = spoof_scenario(7);
    let base = nominal_scenario(10, 3, 120.0);
    let target = base.agents[1].icao.clone();
    let mut mixed = inject_attack(base, AttackKind::Replay, &target, AttackParams { delay_s: 30.0, ..AttackParams::default() })?;
    mixed = inject_attack(
        mixed,
        AttackKind::DosFlood,
        "",
        AttackParams { rate_per_s: 200.0, duration_s: 5.0, start_s: 40.0, ..AttackParams::default() },
    )?;
    let target = mixed.agents[2].icao.clone();
    mixed = inject_attack(mixed, AttackKind::Spoof, &target, AttackParams { jump_km: 50.0, at_time: 90.0, ..AttackParams::default() })?;
    mixed.feedback = Some(FeedbackConfig { high_water: 50.0, low_water: 5.0, tick_s: 10.0 });
    let throughput = nominal_scenario(40, 21, 60.0);
    Ok(vec![("nominal100", nominal), ("spoof", spoof), ("mixed", mixed), ("throughput", throughput)])
}

pub fn run_all(write_to: Option<&Path>) -> Result<(), Box<dyn Error>> {
    for (name, scenario) in scenarios()? {
        let out = sim::run(&scenario)?;
        let c = out.counters;
        println!(
            "{name:>10}: {} events, {} records, {} out of range, {} dropped, {} withheld, {} bursts, {} feedback ticks, conserved {}",
            c.events, c.emitted, c.out_of_range, c.dropped, c.withheld, c.bursts, c.feedback_ticks, c.conserved()
        );
        if let Some(e) = out.log.iter().find(|e| e.kind == EventKind::AttackTrigger) {
            println!("            first trigger at t={} on {}: {}", e.t, e.subject, e.detail);
        }
        if let Some(dir) = write_to {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{name}.json")), scenario.to_json())?;
        }
    }
    Ok(())
}

pub fn run() -> Result<(), Box<dyn Error>> {
    run_all(None)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let args: Vec<String> = std::env::args().collect();
    match args.iter().position(|a| a == "--write") {
        Some(i) => run_all(Some(Path::new(args.get(i + 1).ok_or("--write needs a directory")?))),
        None => run(),
    }
}
