//! ADS-B 1090ES codec: CRC-24, DF17 payloads, CPR positions and CSV exports.
//!
//! Everything here is a pure function over its inputs.

mod cpr;
mod crc;
mod frame;
mod ingest;
mod record;

use thiserror::Error;

pub use cpr::{cpr_decode_global, cpr_encode, nl, CprFrame, Parity, MAX_ABS_LAT, MAX_PAIR_GAP_S};
pub use crc::{crc24, parity, GENERATOR};
pub use frame::{
    decode, encode_identification, encode_position, encode_velocity, parse_frame, DecodedMessage,
    Payload, RawFrame,
};
pub use ingest::{ingest_csv, write_csv, IngestReport, SkippedRow, CSV_HEADER};
pub use record::{AdsbRecord, RecordAssembler};

/// Octets in an extended-squitter frame.
pub const FRAME_BYTES: usize = 14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("frame must be 28 hex characters, got {0}")]
    FrameLength(usize),
    #[error("frame is not valid hex")]
    InvalidHex,
    #[error("crc remainder {0:06X}")]
    Crc(u32),
    #[error("downlink format {0} is not ADS-B (DF17)")]
    NonAdsbFrame(u8),
    #[error("malformed payload: {0}")]
    Malformed(&'static str),
    #[error("out of range: {0}")]
    Range(&'static str),
    #[error("cpr pair needs one even and one odd frame")]
    ParityMismatch,
    #[error("cpr frames {0:.3} s apart")]
    StalePair(f64),
    #[error("cpr frames fall in different latitude zones")]
    PositionAmbiguous,
    #[error("csv header missing required column(s): {0}")]
    Header(String),
    #[error("empty input")]
    EmptyInput,
    #[error("io: {0}")]
    Io(String),
}
