//! Micro vs mono latency with and without access control, as a small grid
//! of runs. The `bench latency` subcommand runs one cell at full size.
//!
//! ```text
//! cargo run --release --example latency_bench
//! ```

use std::error::Error;

use adsb_trust::bench::{run_latency, AcMode, ExperimentConfig};
use adsb_trust::gateway::Arch;

pub fn grid(n_requests: usize, warmup: usize) -> Result<(), Box<dyn Error>> {
    println!("{:>6} {:>9} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}", "arch", "ac", "delay", "mean", "p50", "p95", "auth", "access");
    for (arch, link_delay_ms) in [(Arch::Mono, 0.0), (Arch::Micro, 0.0), (Arch::Micro, 5.0)] {
        for ac in [AcMode::Off, AcMode::Blendcac] {
            let config = ExperimentConfig { arch, ac, n_requests: n_requests + warmup, warmup_requests: warmup, link_delay_ms, ..ExperimentConfig::default() };
            let s = run_latency(&config)?.summary;
            println!(
                "{:>6} {:>9} {:>6} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
                arch.to_string(), ac.to_string(), link_delay_ms, s.mean_ms, s.p50_ms, s.p95_ms, s.auth_mean_ms, s.access_mean_ms
            );
        }
    }
    Ok(())
}

pub fn run() -> Result<(), Box<dyn Error>> {
    grid(20, 5)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    grid(200, 50)
}
