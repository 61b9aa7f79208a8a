//! Compact Position Reporting, airborne 17-bit format.
//!
//! Global decoding pairs one even and one odd frame. Latitudes beyond ±87°
//! (the two polar zones) are outside the supported range.

use serde::{Deserialize, Serialize};

use super::CodecError;

/// Latitude zones per hemisphere quarter.
const NZ: f64 = 15.0;
const SCALE: f64 = 131072.0; // 2^17
/// Maximum time between the frames of a global pair, in seconds.
pub const MAX_PAIR_GAP_S: f64 = 10.0;
pub const MAX_ABS_LAT: f64 = 87.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CprFrame {
    pub parity: Parity,
    pub lat_cpr: u32,
    pub lon_cpr: u32,
    pub t: f64,
}

/// Number of longitude zones at `lat`.
pub fn nl(lat: f64) -> u32 {
    let lat = lat.abs();
    if lat < 1e-9 {
        return 59;
    }
    if lat > MAX_ABS_LAT {
        return 1;
    }
    if (lat - MAX_ABS_LAT).abs() < 1e-9 {
        return 2;
    }
    let a = 1.0 - (std::f64::consts::PI / (2.0 * NZ)).cos();
    let b = (std::f64::consts::PI / 180.0 * lat).cos().powi(2);
    (2.0 * std::f64::consts::PI / (1.0 - a / b).acos()).floor() as u32
}

fn dlat(parity: Parity) -> f64 {
    match parity {
        Parity::Even => 360.0 / (4.0 * NZ),
        Parity::Odd => 360.0 / (4.0 * NZ - 1.0),
    }
}

fn parity_index(parity: Parity) -> u32 {
    match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    }
}

/// Encodes a position into the 17-bit even or odd representation.
pub fn cpr_encode(lat_deg: f64, lon_deg: f64, parity: Parity, t: f64) -> Result<CprFrame, CodecError> {
    if !lat_deg.is_finite() || !lon_deg.is_finite() || lat_deg.abs() > MAX_ABS_LAT {
        return Err(CodecError::Range("latitude outside ±87°"));
    }
    if lon_deg <= -180.0 || lon_deg > 180.0 {
        return Err(CodecError::Range("longitude outside (-180, 180]"));
    }
    let d_lat = dlat(parity);
    let yz = (SCALE * lat_deg.rem_euclid(d_lat) / d_lat + 0.5).floor();
    let rlat = d_lat * (yz / SCALE + (lat_deg / d_lat).floor());
    let zones = nl(rlat).saturating_sub(parity_index(parity)).max(1);
    let d_lon = 360.0 / zones as f64;
    let xz = (SCALE * lon_deg.rem_euclid(d_lon) / d_lon + 0.5).floor();
    Ok(CprFrame {
        parity,
        lat_cpr: (yz as u32) % (1 << 17),
        lon_cpr: (xz as u32) % (1 << 17),
        t,
    })
}

/// Globally unambiguous decode of an even/odd pair. The longitude zone of the
/// more recent frame is used; ties go to the even frame.
pub fn cpr_decode_global(even: &CprFrame, odd: &CprFrame) -> Result<(f64, f64), CodecError> {
    if even.parity != Parity::Even || odd.parity != Parity::Odd {
        return Err(CodecError::ParityMismatch);
    }
    if (even.t - odd.t).abs() > MAX_PAIR_GAP_S {
        return Err(CodecError::StalePair((even.t - odd.t).abs()));
    }
    let lat_e = even.lat_cpr as f64 / SCALE;
    let lat_o = odd.lat_cpr as f64 / SCALE;
    let lon_e = even.lon_cpr as f64 / SCALE;
    let lon_o = odd.lon_cpr as f64 / SCALE;

    let j = (59.0 * lat_e - 60.0 * lat_o + 0.5).floor();
    let mut rlat_e = dlat(Parity::Even) * (j.rem_euclid(60.0) + lat_e);
    let mut rlat_o = dlat(Parity::Odd) * (j.rem_euclid(59.0) + lat_o);
    if rlat_e >= 270.0 {
        rlat_e -= 360.0;
    }
    if rlat_o >= 270.0 {
        rlat_o -= 360.0;
    }
    if rlat_e.abs() > MAX_ABS_LAT || rlat_o.abs() > MAX_ABS_LAT {
        return Err(CodecError::Range("decoded latitude in a polar zone"));
    }
    if nl(rlat_e) != nl(rlat_o) {
        return Err(CodecError::PositionAmbiguous);
    }

    let use_even = even.t >= odd.t;
    let lat = if use_even { rlat_e } else { rlat_o };
    let nl_lat = nl(lat) as f64;
    let m = (lon_e * (nl_lat - 1.0) - lon_o * nl_lat + 0.5).floor();
    let (ni, lon_frac) = if use_even {
        (nl_lat.max(1.0), lon_e)
    } else {
        ((nl_lat - 1.0).max(1.0), lon_o)
    };
    let mut lon = 360.0 / ni * (m.rem_euclid(ni) + lon_frac);
    if lon > 180.0 {
        lon -= 360.0;
    }
    Ok((lat, lon))
}
