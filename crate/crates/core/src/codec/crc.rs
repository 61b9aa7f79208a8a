//! Mode-S CRC-24 (generator 0xFFF409).
//!
//! The parity field of an extended squitter is the CRC of the first 88 bits,
//! so the remainder of a received frame is `crc(data) ^ parity`. A valid
//! DF17 frame has a remainder of zero.

use super::{CodecError, FRAME_BYTES};

/// Generator polynomial without the implicit x^24 term.
pub const GENERATOR: u32 = 0xFFF409;

const TABLE: [u32; 256] = build_table();

const fn build_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut reg = (i as u32) << 16;
        let mut bit = 0;
        while bit < 8 {
            reg <<= 1;
            if reg & 0x0100_0000 != 0 {
                reg ^= GENERATOR | 0x0100_0000;
            }
            bit += 1;
        }
        table[i] = reg & 0x00FF_FFFF;
        i += 1;
    }
    table
}

/// CRC of `data` augmented by 24 zero bits, i.e. the parity a transmitter
/// appends to `data`.
pub fn parity(data: &[u8]) -> u32 {
    data.iter().fold(0u32, |reg, &byte| {
        let idx = ((reg >> 16) ^ byte as u32) & 0xFF;
        ((reg << 8) ^ TABLE[idx as usize]) & 0x00FF_FFFF
    })
}

/// Remainder of a full 112-bit frame. Zero means the frame is accepted.
pub fn crc24(frame: &[u8]) -> Result<u32, CodecError> {
    if frame.len() != FRAME_BYTES {
        return Err(CodecError::FrameLength(frame.len() * 2));
    }
    let (data, tail) = frame.split_at(FRAME_BYTES - 3);
    let received = (tail[0] as u32) << 16 | (tail[1] as u32) << 8 | tail[2] as u32;
    Ok(parity(data) ^ received)
}
