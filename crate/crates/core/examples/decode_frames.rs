//! Decode raw 1090ES frames, assemble records from a CPR pair and export
//! them as CSV.
//!
//! ```text
//! cargo run --example decode_frames
//! ```

use std::error::Error;

use adsb_trust::codec::{crc24, ingest_csv, parse_frame, write_csv, Payload, RecordAssembler};

const FRAMES: [(&str, f64); 4] = [
    ("8D4840D6202CC371C32CE0576098", 0.0),
    ("8D40621D99440994083817000000", 0.5),
    ("8D40621D58C382D690C8AC2863A7", 1.0),
    ("8D40621D58C386435CC412692AD6", 1.5),
];

pub fn run() -> Result<(), Box<dyn Error>> {
    for (hex, t) in FRAMES {
        match parse_frame(hex, t) {
            Ok(msg) => println!("{hex}  {}  {:?}", msg.icao, msg.payload),
            Err(e) => println!("{hex}  rejected: {e}"),
        }
    }

    let velocity = parse_frame("8D485020994409940838175B284F", 0.0)?;
    if let Payload::AirborneVelocity { ground_speed_kt, track_deg, vertical_rate_fpm } = velocity.payload {
        println!("485020 velocity: {ground_speed_kt:.1} kt, {track_deg:.1} deg, {vertical_rate_fpm} fpm");
    }

    // A frame with one flipped bit never passes the checksum.
    let mut bytes = hex::decode("8D4840D6202CC371C32CE0576098")?;
    bytes[5] ^= 0x10;
    println!("crc remainder after a bit flip: {:06X}", crc24(&bytes)?);

    // Reuse the position pair under an ICAO that also has a velocity report.
    let mut asm = RecordAssembler::new();
    let mut records = Vec::new();
    let stream = [
        ("8D485020994409940838175B284F", 1.0),
        ("8D48502058C382D690C8AC000000", 2.0),
        ("8D48502058C386435CC412000000", 2.5),
    ];
    for (hex, t) in stream {
        let mut raw = hex::decode(hex)?;
        let p = adsb_trust::codec::parity(&raw[..11]);
        raw[11..].copy_from_slice(&p.to_be_bytes()[1..]);
        let msg = parse_frame(&hex::encode_upper(&raw), t)?;
        records.extend(asm.push(&msg));
    }
    for r in &records {
        println!("record {}", r.to_json());
    }

    let mut csv = Vec::new();
    write_csv(&mut csv, &records)?;
    print!("{}", String::from_utf8(csv.clone())?);
    let back = ingest_csv(&csv[..])?;
    println!("re-ingested {} records, {} skipped", back.records.len(), back.skip_count());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
