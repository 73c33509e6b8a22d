//! Range-variant asymmetric numeral system coder: 32-bit state, byte-wise
//! renormalization, 12-bit frequency precision.

use super::freq::{FrequencyTable, FREQ_BITS, FREQ_TOTAL};
use crate::error::{Error, Result};

/// Lower bound of the normalized state interval `[L, L << 8)`.
const LOWER: u32 = 1 << 23;

/// Encode `symbols` under `table`. Output layout: 4 big-endian bytes of
/// final state, then the renormalization bytes in decode order.
pub fn rans_encode(symbols: &[u16], table: &FrequencyTable) -> Result<Vec<u8>> {
    let mut state: u32 = LOWER;
    let mut tail: Vec<u8> = Vec::new();
    // symbols are consumed back-to-front so the decoder emits them
    // front-to-back
    for &sym in symbols.iter().rev() {
        let f = table.freq(sym);
        if f == 0 {
            return Err(Error::ZeroFrequency(sym as u32));
        }
        let c = table.cum(sym);
        let x_max = ((LOWER >> FREQ_BITS) << 8) * f;
        while state >= x_max {
            tail.push((state & 0xFF) as u8);
            state >>= 8;
        }
        state = ((state / f) << FREQ_BITS) + (state % f) + c;
    }
    let mut out = Vec::with_capacity(4 + tail.len());
    out.extend_from_slice(&state.to_be_bytes());
    tail.reverse();
    out.extend_from_slice(&tail);
    Ok(out)
}

/// Decode exactly `n` symbols. Errors on truncated input, leftover bytes,
/// or a final state that does not return to the normalization lower bound.
pub fn rans_decode(bytes: &[u8], table: &FrequencyTable, n: usize) -> Result<Vec<u16>> {
    if bytes.len() < 4 {
        return Err(Error::CorruptStream("rans stream shorter than state".into()));
    }
    let mut state = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let mut pos = 4usize;
    if n > 0 && state < LOWER {
        return Err(Error::CorruptStream(format!(
            "rans initial state {state:#x} below lower bound"
        )));
    }
    let slots = table.slot_table();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let slot = state & (FREQ_TOTAL - 1);
        let sym = slots[slot as usize];
        let f = table.freq(sym);
        let c = table.cum(sym);
        state = f * (state >> FREQ_BITS) + slot - c;
        while state < LOWER {
            if pos >= bytes.len() {
                return Err(Error::CorruptStream("rans stream truncated".into()));
            }
            state = (state << 8) | bytes[pos] as u32;
            pos += 1;
        }
        out.push(sym);
    }
    if state != LOWER {
        return Err(Error::CorruptStream(format!(
            "rans final state {state:#x}, want {LOWER:#x}"
        )));
    }
    if pos != bytes.len() {
        return Err(Error::CorruptStream(format!(
            "rans stream has {} leftover bytes",
            bytes.len() - pos
        )));
    }
    Ok(out)
}
