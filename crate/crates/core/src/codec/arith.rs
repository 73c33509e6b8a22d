//! Static arithmetic coding via a 32-bit carry-propagating range coder
//! over the shared frequency table.

use super::freq::{FrequencyTable, FREQ_TOTAL};
use crate::error::{Error, Result};

const TOP: u32 = 1 << 24;

struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl RangeEncoder {
    fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 24) & 0xFF) as u8;
        }
        self.cache_size += 1;
        self.low = ((self.low as u32) << 8) as u64;
    }

    fn encode(&mut self, cum: u32, freq: u32) {
        let r = self.range / FREQ_TOTAL;
        self.low += (r as u64) * (cum as u64);
        self.range = r * freq;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

struct RangeDecoder<'a> {
    code: u32,
    range: u32,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    fn new(bytes: &'a [u8]) -> Result<Self> {
        if bytes.is_empty() || bytes[0] != 0 {
            return Err(Error::CorruptStream(
                "range coder stream missing zero lead byte".into(),
            ));
        }
        if bytes.len() < 5 {
            return Err(Error::CorruptStream("range coder stream truncated".into()));
        }
        let code = u32::from_be_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]);
        Ok(RangeDecoder {
            code,
            range: u32::MAX,
            bytes,
            pos: 5,
        })
    }

    fn next_byte(&mut self) -> Result<u8> {
        if self.pos >= self.bytes.len() {
            return Err(Error::CorruptStream("range coder stream truncated".into()));
        }
        let b = self.bytes[self.pos];
        self.pos += 1;
        Ok(b)
    }

    fn decode(&mut self, table: &FrequencyTable, slots: &[u16]) -> Result<u16> {
        let r = self.range / FREQ_TOTAL;
        let slot = self.code / r;
        if slot >= FREQ_TOTAL {
            return Err(Error::CorruptStream(format!(
                "range coder slot {slot} out of range"
            )));
        }
        let sym = slots[slot as usize];
        let cum = table.cum(sym);
        let freq = table.freq(sym);
        self.code -= r * cum;
        if self.code >= r * freq {
            return Err(Error::CorruptStream(
                "range coder code outside symbol interval".into(),
            ));
        }
        self.range = r * freq;
        while self.range < TOP {
            self.range <<= 8;
            let b = self.next_byte()?;
            self.code = (self.code << 8) | b as u32;
        }
        Ok(sym)
    }
}

/// Encode `symbols` under `table` with the range coder.
pub fn arith_encode(symbols: &[u16], table: &FrequencyTable) -> Result<Vec<u8>> {
    let mut enc = RangeEncoder::new();
    for &sym in symbols {
        let f = table.freq(sym);
        if f == 0 {
            return Err(Error::ZeroFrequency(sym as u32));
        }
        enc.encode(table.cum(sym), f);
    }
    Ok(enc.finish())
}

/// Decode exactly `n` symbols. Renormalization mirrors the encoder
/// byte-for-byte (the range sequence is identical on both sides), so the
/// decoder consumes the stream exactly; leftovers mean corruption.
pub fn arith_decode(bytes: &[u8], table: &FrequencyTable, n: usize) -> Result<Vec<u16>> {
    let mut dec = RangeDecoder::new(bytes)?;
    let slots = table.slot_table();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(dec.decode(table, &slots)?);
    }
    if dec.pos != bytes.len() {
        return Err(Error::CorruptStream(format!(
            "range coder stream has {} leftover bytes",
            bytes.len() - dec.pos
        )));
    }
    Ok(out)
}
