//! DF17 extended-squitter parsing and encoding.

use serde::{Deserialize, Serialize};

use super::cpr::{CprFrame, Parity};
use super::crc::{crc24, parity};
use super::{CodecError, FRAME_BYTES};

const CALLSIGN_CHARSET: &[u8; 64] =
    b"#ABCDEFGHIJKLMNOPQRSTUVWXYZ##### ###############0123456789######";

/// A raw 112-bit frame as received.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    bytes: [u8; FRAME_BYTES],
    /// Receive time in seconds, millisecond precision.
    pub received_at: f64,
}

impl RawFrame {
    /// Normalizes `hex` (case, whitespace, common separators and a leading
    /// `*`/trailing `;` as written by Beast/AVR tools) and checks the length.
    pub fn from_hex(hex: &str, received_at: f64) -> Result<Self, CodecError> {
        let cleaned: String = hex
            .trim()
            .trim_start_matches('*')
            .trim_end_matches(';')
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ':' && *c != '-')
            .collect();
        if cleaned.len() != FRAME_BYTES * 2 {
            return Err(CodecError::FrameLength(cleaned.len()));
        }
        let mut bytes = [0u8; FRAME_BYTES];
        hex::decode_to_slice(&cleaned, &mut bytes).map_err(|_| CodecError::InvalidHex)?;
        Ok(RawFrame {
            bytes,
            received_at: round_ms(received_at),
        })
    }

    pub fn from_bytes(bytes: [u8; FRAME_BYTES], received_at: f64) -> Self {
        RawFrame {
            bytes,
            received_at: round_ms(received_at),
        }
    }

    pub fn bytes(&self) -> &[u8; FRAME_BYTES] {
        &self.bytes
    }

    pub fn to_hex(&self) -> String {
        hex::encode_upper(self.bytes)
    }
}

fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Identification {
        callsign: String,
    },
    AirbornePosition {
        cpr: CprFrame,
        altitude_ft: i32,
    },
    AirborneVelocity {
        ground_speed_kt: f64,
        track_deg: f64,
        vertical_rate_fpm: i32,
    },
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedMessage {
    pub downlink_format: u8,
    pub icao: String,
    pub type_code: u8,
    pub payload: Payload,
    pub received_at: f64,
}

/// Parses one hex frame. Only DF17 frames with a zero CRC remainder yield a
/// message; other downlink formats are reported as [`CodecError::NonAdsbFrame`].
pub fn parse_frame(hex: &str, received_at: f64) -> Result<DecodedMessage, CodecError> {
    let frame = RawFrame::from_hex(hex, received_at)?;
    decode(&frame)
}

pub fn decode(frame: &RawFrame) -> Result<DecodedMessage, CodecError> {
    let b = frame.bytes();
    let remainder = crc24(b)?;
    if remainder != 0 {
        return Err(CodecError::Crc(remainder));
    }
    let df = b[0] >> 3;
    if df != 17 {
        return Err(CodecError::NonAdsbFrame(df));
    }
    let icao = format!("{:02X}{:02X}{:02X}", b[1], b[2], b[3]);
    let me = b[4..11].iter().fold(0u64, |acc, &x| acc << 8 | x as u64);
    let tc = (me >> 51) as u8;
    let payload = match tc {
        1..=4 => decode_identification(me)?,
        9..=18 => decode_position(me, frame.received_at),
        19 => decode_velocity(me),
        _ => Payload::Unsupported,
    };
    Ok(DecodedMessage {
        downlink_format: df,
        icao,
        type_code: tc,
        payload,
        received_at: frame.received_at,
    })
}

/// `start` counts from the most significant bit of the 56-bit ME field.
fn bits(me: u64, start: u32, len: u32) -> u64 {
    (me >> (56 - start - len)) & ((1u64 << len) - 1)
}

fn decode_identification(me: u64) -> Result<Payload, CodecError> {
    let mut callsign = String::with_capacity(8);
    for i in 0..8 {
        let idx = bits(me, 8 + 6 * i, 6) as usize;
        let c = CALLSIGN_CHARSET[idx];
        if c == b'#' {
            return Err(CodecError::Malformed("callsign character outside the 6-bit alphabet"));
        }
        callsign.push(c as char);
    }
    Ok(Payload::Identification {
        callsign: callsign.trim_end().to_string(),
    })
}

fn decode_position(me: u64, t: f64) -> Payload {
    let alt_field = bits(me, 8, 12) as u32;
    // Gillham-coded (Q=0) altitudes are not decoded.
    if alt_field & 0x010 == 0 {
        return Payload::Unsupported;
    }
    let n = ((alt_field & 0xFE0) >> 1) | (alt_field & 0x00F);
    let altitude_ft = n as i32 * 25 - 1000;
    let parity = if bits(me, 21, 1) == 1 { Parity::Odd } else { Parity::Even };
    Payload::AirbornePosition {
        cpr: CprFrame {
            parity,
            lat_cpr: bits(me, 22, 17) as u32,
            lon_cpr: bits(me, 39, 17) as u32,
            t,
        },
        altitude_ft,
    }
}

fn decode_velocity(me: u64) -> Payload {
    let subtype = bits(me, 5, 3);
    if subtype != 1 && subtype != 2 {
        return Payload::Unsupported;
    }
    let raw_ew = bits(me, 14, 10) as i64;
    let raw_ns = bits(me, 25, 10) as i64;
    let raw_vr = bits(me, 37, 9) as i64;
    if raw_ew == 0 || raw_ns == 0 {
        return Payload::Unsupported;
    }
    let scale = if subtype == 2 { 4 } else { 1 };
    let mut v_ew = ((raw_ew - 1) * scale) as f64;
    let mut v_ns = ((raw_ns - 1) * scale) as f64;
    if bits(me, 13, 1) == 1 {
        v_ew = -v_ew;
    }
    if bits(me, 24, 1) == 1 {
        v_ns = -v_ns;
    }
    let ground_speed_kt = v_ew.hypot(v_ns);
    let track_deg = normalize_deg(v_ew.atan2(v_ns).to_degrees());
    let vertical_rate_fpm = if raw_vr == 0 {
        0
    } else {
        let mag = ((raw_vr - 1) * 64) as i32;
        if bits(me, 36, 1) == 1 { -mag } else { mag }
    };
    Payload::AirborneVelocity {
        ground_speed_kt,
        track_deg,
        vertical_rate_fpm,
    }
}

pub(crate) fn normalize_deg(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 { 0.0 } else { d }
}

fn parse_icao(icao: &str) -> Result<[u8; 3], CodecError> {
    let mut out = [0u8; 3];
    hex::decode_to_slice(icao, &mut out).map_err(|_| CodecError::InvalidHex)?;
    Ok(out)
}

fn assemble(icao: &str, me: u64, received_at: f64) -> Result<RawFrame, CodecError> {
    let mut bytes = [0u8; FRAME_BYTES];
    bytes[0] = (17 << 3) | 5;
    bytes[1..4].copy_from_slice(&parse_icao(icao)?);
    bytes[4..11].copy_from_slice(&me.to_be_bytes()[1..]);
    let p = parity(&bytes[..11]);
    bytes[11] = (p >> 16) as u8;
    bytes[12] = (p >> 8) as u8;
    bytes[13] = p as u8;
    Ok(RawFrame::from_bytes(bytes, received_at))
}

/// Encodes an identification frame (type code 4).
pub fn encode_identification(icao: &str, callsign: &str, received_at: f64) -> Result<RawFrame, CodecError> {
    let mut me: u64 = 4 << 51;
    let padded = format!("{:<8}", callsign.to_ascii_uppercase());
    if padded.len() != 8 {
        return Err(CodecError::Malformed("callsign longer than 8 characters"));
    }
    for (i, c) in padded.bytes().enumerate() {
        let idx = CALLSIGN_CHARSET
            .iter()
            .position(|&x| x == c && x != b'#')
            .ok_or(CodecError::Malformed("callsign character outside the 6-bit alphabet"))?;
        me |= (idx as u64) << (48 - 6 * (i as u32 + 1));
    }
    assemble(icao, me, received_at)
}

/// Encodes an airborne position frame (type code 11, 25 ft altitude steps).
pub fn encode_position(icao: &str, cpr: &CprFrame, altitude_ft: i32) -> Result<RawFrame, CodecError> {
    let n = ((altitude_ft + 1000) as f64 / 25.0).round();
    if !(0.0..=2047.0).contains(&n) {
        return Err(CodecError::Range("altitude outside the 25 ft encodable band"));
    }
    let n = n as u64;
    let alt_field = ((n & 0x7F0) << 1) | 0x010 | (n & 0x00F);
    let odd = matches!(cpr.parity, Parity::Odd) as u64;
    let me = (11u64 << 51)
        | (alt_field << 36)
        | (odd << 34)
        | ((cpr.lat_cpr as u64) << 17)
        | cpr.lon_cpr as u64;
    assemble(icao, me, cpr.t)
}

/// Encodes a subsonic ground-speed velocity frame (type code 19, subtype 1).
pub fn encode_velocity(
    icao: &str,
    ground_speed_kt: f64,
    track_deg: f64,
    vertical_rate_fpm: i32,
    received_at: f64,
) -> Result<RawFrame, CodecError> {
    let rad = track_deg.to_radians();
    let v_ew = (ground_speed_kt * rad.sin()).round() as i64;
    let v_ns = (ground_speed_kt * rad.cos()).round() as i64;
    if v_ew.abs() > 1021 || v_ns.abs() > 1021 {
        return Err(CodecError::Range("ground speed beyond subsonic encoding"));
    }
    let vr = (vertical_rate_fpm.unsigned_abs() as f64 / 64.0).round() as u64 + 1;
    if vr > 511 {
        return Err(CodecError::Range("vertical rate beyond encoding"));
    }
    let me = (19u64 << 51)
        | (1 << 48)
        | (((v_ew < 0) as u64) << 42)
        | ((v_ew.unsigned_abs() + 1) << 32)
        | (((v_ns < 0) as u64) << 31)
        | ((v_ns.unsigned_abs() + 1) << 21)
        | (((vertical_rate_fpm < 0) as u64) << 19)
        | (vr << 10);
    assemble(icao, me, received_at)
}
