//! Edge tier: fold reports into tracks inside an airspace box and extract
//! the movement features that are shipped to the fog tier.
//!
//! ```text
//! cargo run --example track_features
//! ```

use std::error::Error;

use adsb_trust::codec::AdsbRecord;
use adsb_trust::tracker::{parse_features, serialize_features, AirspaceBox, TrackStore, TrackerConfig, UpdateOutcome};

fn report(icao: &str, lat: f64, lon: f64, t: f64) -> AdsbRecord {
    AdsbRecord {
        icao: icao.into(),
        callsign: None,
        lat_deg: lat,
        lon_deg: lon,
        altitude_ft: 35000,
        ground_speed_kt: 450.0,
        track_deg: 90.0,
        vertical_rate_fpm: 0,
        timestamp: t,
    }
}

pub fn run() -> Result<(), Box<dyn Error>> {
    let airspace = AirspaceBox { lat_min: 45.0, lat_max: 49.0, lon_min: 5.0, lon_max: 11.0 };
    let mut store = TrackStore::new(TrackerConfig { window: 8, ttl_s: 30.0, airspace });

    // 450 kt due east is roughly 0.0034 deg of longitude per second here.
    for i in 0..10 {
        let t = 1.0 + i as f64;
        store.update(&report("4B1805", 47.0, 8.0 + 0.0034 * i as f64, t))?;
    }
    // A position that jumps 100 km in one second.
    store.update(&report("4B1805", 47.9, 8.04, 11.0))?;
    // Out of order and out of the box.
    println!("late report: {:?}", store.update(&report("4B1805", 47.0, 8.0, 5.0)).unwrap_err());
    println!("outside box: {:?}", store.update(&report("3C6444", 52.0, 13.0, 2.0)).unwrap_err());
    assert_eq!(store.update(&report("4B1805", 60.0, 8.0, 12.0))?, UpdateOutcome::Closed);
    store.update(&report("4D2231", 46.5, 7.0, 20.0))?;
    store.update(&report("4D2231", 46.5, 7.004, 21.0))?;

    let features = store.feature_map();
    for (key, fv) in &features.entries {
        println!(
            "{key} {}: implied {:.0} kt, gap {:.1} s, heading delta {:.1}",
            fv.icao, fv.implied_speed_kt, fv.report_gap_s, fv.heading_delta_deg
        );
    }
    let doc = serialize_features(&features);
    println!("{}", String::from_utf8_lossy(&doc));
    // The wire format carries six decimals.
    let back = parse_features(&doc)?;
    for (key, fv) in &back.entries {
        assert!((fv.implied_speed_kt - features.entries[key].implied_speed_kt).abs() < 1e-6);
    }

    for closed in store.take_closed() {
        println!("closed {} ({:?}, {} points)", closed.icao, closed.reason, closed.points);
    }
    println!("{:?}", store.counters());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
