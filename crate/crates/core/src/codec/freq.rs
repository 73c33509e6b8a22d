//! Static symbol-frequency model shared by all three entropy coders.

use crate::error::{Error, Result};

/// Frequencies are normalized to sum to exactly `FREQ_TOTAL = 2^FREQ_BITS`.
pub const FREQ_BITS: u32 = 12;
pub const FREQ_TOTAL: u32 = 1 << FREQ_BITS;

/// Normalized integer frequencies over a dense alphabet `0..S`. Every
/// symbol that occurs in the source stream has frequency >= 1; the sum is
/// exactly [`FREQ_TOTAL`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    freqs: Vec<u32>,
    /// Exclusive prefix sums; `cum[S] == FREQ_TOTAL`.
    cum: Vec<u32>,
}

impl FrequencyTable {
    /// Build from already-normalized frequencies (e.g. parsed from a
    /// bundle). Rejects tables that don't sum to [`FREQ_TOTAL`].
    pub fn from_freqs(freqs: Vec<u32>) -> Result<Self> {
        let sum: u64 = freqs.iter().map(|&f| f as u64).sum();
        if sum != FREQ_TOTAL as u64 {
            return Err(Error::CorruptStream(format!(
                "frequency table sums to {sum}, want {FREQ_TOTAL}"
            )));
        }
        if freqs.len() > 1 << 16 {
            return Err(Error::AlphabetTooLarge(freqs.len()));
        }
        let mut cum = Vec::with_capacity(freqs.len() + 1);
        let mut acc = 0u32;
        cum.push(0);
        for &f in &freqs {
            acc += f;
            cum.push(acc);
        }
        Ok(FrequencyTable { freqs, cum })
    }

    pub fn alphabet_size(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self) -> &[u32] {
        &self.freqs
    }

    #[inline]
    pub fn freq(&self, sym: u16) -> u32 {
        self.freqs.get(sym as usize).copied().unwrap_or(0)
    }

    #[inline]
    pub fn cum(&self, sym: u16) -> u32 {
        self.cum[sym as usize]
    }

    /// Slot-to-symbol lookup covering `0..FREQ_TOTAL`.
    pub fn slot_table(&self) -> Vec<u16> {
        let mut slots = vec![0u16; FREQ_TOTAL as usize];
        for (s, &f) in self.freqs.iter().enumerate() {
            let lo = self.cum[s] as usize;
            for slot in slots.iter_mut().skip(lo).take(f as usize) {
                *slot = s as u16;
            }
        }
        slots
    }
}

/// Histogram `symbols`, then normalize counts to sum [`FREQ_TOTAL`] with
/// every seen symbol keeping frequency >= 1. Rounding is deterministic
/// largest-remainder: surplus is removed from the smallest remainders and
/// deficit added to the largest, ties broken toward the lower symbol.
pub fn build_freq_table(symbols: &[u16]) -> Result<FrequencyTable> {
    if symbols.is_empty() {
        return Err(Error::EmptyStream);
    }
    let s = *symbols.iter().max().unwrap() as usize + 1;
    let mut counts = vec![0u64; s];
    for &sym in symbols {
        counts[sym as usize] += 1;
    }
    let seen = counts.iter().filter(|&&c| c > 0).count();
    if seen > FREQ_TOTAL as usize {
        return Err(Error::AlphabetTooLarge(seen));
    }
    let total = symbols.len() as u64;

    // ideal share in 1/FREQ_TOTAL units, floored with a floor of 1
    let mut freqs = vec![0u32; s];
    let mut remainders = vec![0.0f64; s];
    let mut sum = 0u64;
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let ideal = c as f64 * FREQ_TOTAL as f64 / total as f64;
        let fl = ideal.floor();
        remainders[i] = ideal - fl;
        let f = (fl as u32).max(1);
        freqs[i] = f;
        sum += f as u64;
    }

    if sum < FREQ_TOTAL as u64 {
        // hand out the deficit to the largest remainders first
        let mut order: Vec<usize> = (0..s).filter(|&i| counts[i] > 0).collect();
        order.sort_by(|&a, &b| {
            remainders[b]
                .partial_cmp(&remainders[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut deficit = FREQ_TOTAL as u64 - sum;
        'outer_add: loop {
            for &i in &order {
                if deficit == 0 {
                    break 'outer_add;
                }
                freqs[i] += 1;
                deficit -= 1;
            }
        }
    } else if sum > FREQ_TOTAL as u64 {
        // reclaim the surplus from the smallest remainders, never dropping
        // a seen symbol below 1
        let mut order: Vec<usize> = (0..s).filter(|&i| counts[i] > 0).collect();
        order.sort_by(|&a, &b| {
            remainders[a]
                .partial_cmp(&remainders[b])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut surplus = sum - FREQ_TOTAL as u64;
        'outer_sub: loop {
            let mut moved = false;
            for &i in &order {
                if surplus == 0 {
                    break 'outer_sub;
                }
                if freqs[i] > 1 {
                    freqs[i] -= 1;
                    surplus -= 1;
                    moved = true;
                }
            }
            if !moved {
                return Err(Error::AlphabetTooLarge(seen));
            }
        }
    }

    FrequencyTable::from_freqs(freqs)
}

/// Ideal code length of `symbols` under `table`, in bits: the negative
/// base-2 log-likelihood of the stream under the static model.
pub fn estimate_rate_bits(symbols: &[u16], table: &FrequencyTable) -> Result<f64> {
    let mut bits = 0.0;
    for &sym in symbols {
        let f = table.freq(sym);
        if f == 0 {
            return Err(Error::ZeroFrequency(sym as u32));
        }
        bits -= (f as f64 / FREQ_TOTAL as f64).log2();
    }
    Ok(bits)
}
