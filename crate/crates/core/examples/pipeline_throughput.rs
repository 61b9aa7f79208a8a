//! Batches of over-the-air messages through decode, tracking, feature
//! extraction and fusion, with wall time and a CPU utilization proxy per
//! batch.
//!
//! ```text
//! cargo run --release --example pipeline_throughput
//! ```

use std::error::Error;

use adsb_trust::bench::{run_throughput, to_csv, ThroughputConfig};
use adsb_trust::sim::nominal_scenario;

pub fn run() -> Result<(), Box<dyn Error>> {
    let scenario = nominal_scenario(40, 21, 60.0);
    let result = run_throughput(&scenario, &ThroughputConfig::default())?;
    print!("{}", String::from_utf8(to_csv(&result.rows)?)?);
    println!("{} of {} messages processed, {} alerts", result.total_processed, result.total_messages, result.alerts);
    for p in &result.properties {
        println!("{} {}", if p.holds { "ok  " } else { "FAIL" }, p.name);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
