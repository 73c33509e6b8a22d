//! Length-limited canonical Huffman coding. Code lengths come from the
//! package-merge algorithm over the shared frequency table, so encoder and
//! decoder rebuild identical codes from the table alone — no trees or
//! length lists travel with the stream.

use super::freq::FrequencyTable;
use crate::error::{Error, Result};

/// Longest permitted codeword. 2^16 leaves is far above any alphabet the
/// table admits, so limited codes always exist.
pub const MAX_CODE_LEN: usize = 16;

/// Per-symbol code lengths (0 for unseen symbols) via package-merge.
pub fn code_lengths(table: &FrequencyTable) -> Vec<u8> {
    let freqs = table.freqs();
    let seen: Vec<usize> = (0..freqs.len()).filter(|&s| freqs[s] > 0).collect();
    let mut lengths = vec![0u8; freqs.len()];
    match seen.len() {
        0 => return lengths,
        1 => {
            // a lone symbol still needs one bit so the stream has content
            lengths[seen[0]] = 1;
            return lengths;
        }
        _ => {}
    }

    // package-merge: nodes are either leaves or pairs from the previous
    // level; counting how many chosen packages contain each leaf yields its
    // code length
    #[derive(Clone, Copy)]
    enum Node {
        Leaf(u32),
        // indices into the previous level's arena
        Pair(u32, u32),
    }
    let mut leaves: Vec<(u64, u32)> = seen
        .iter()
        .map(|&s| (freqs[s] as u64, s as u32))
        .collect();
    leaves.sort_by_key(|&(w, s)| (w, s));

    // arena[level] = (weight, node) sorted ascending
    let mut arena: Vec<Vec<(u64, Node)>> = Vec::with_capacity(MAX_CODE_LEN);
    let leaf_level: Vec<(u64, Node)> = leaves
        .iter()
        .map(|&(w, s)| (w, Node::Leaf(s)))
        .collect();
    arena.push(leaf_level.clone());
    for _ in 1..MAX_CODE_LEN {
        let prev = arena.last().unwrap();
        // package pairs of the previous level
        let mut packages: Vec<(u64, Node)> = Vec::with_capacity(prev.len() / 2);
        let mut i = 0;
        while i + 1 < prev.len() {
            packages.push((
                prev[i].0 + prev[i + 1].0,
                Node::Pair(i as u32, (i + 1) as u32),
            ));
            i += 2;
        }
        // merge with a fresh copy of the leaves (stable: leaves first on
        // ties so shallow trees win)
        let mut level = Vec::with_capacity(leaf_level.len() + packages.len());
        let (mut a, mut b) = (0, 0);
        while a < leaf_level.len() || b < packages.len() {
            let take_leaf = match (leaf_level.get(a), packages.get(b)) {
                (Some(l), Some(p)) => l.0 <= p.0,
                (Some(_), None) => true,
                _ => false,
            };
            if take_leaf {
                level.push(leaf_level[a]);
                a += 1;
            } else {
                level.push(packages[b]);
                b += 1;
            }
        }
        arena.push(level);
    }

    // choose the 2(S-1) cheapest items of the deepest level and expand
    fn expand(arena: &[Vec<(u64, Node)>], level: usize, idx: usize, lengths: &mut [u8]) {
        match arena[level][idx].1 {
            Node::Leaf(s) => lengths[s as usize] += 1,
            Node::Pair(l, r) => {
                expand(arena, level - 1, l as usize, lengths);
                expand(arena, level - 1, r as usize, lengths);
            }
        }
    }
    let top = arena.len() - 1;
    let want = 2 * (seen.len() - 1);
    for idx in 0..want {
        expand(&arena, top, idx, &mut lengths);
    }
    lengths
}

/// Canonical code assignment: symbols sorted by (length, symbol) receive
/// consecutive codewords, shorter lengths first.
fn canonical_codes(lengths: &[u8]) -> Vec<(u32, u8)> {
    let mut order: Vec<usize> = (0..lengths.len()).filter(|&s| lengths[s] > 0).collect();
    order.sort_by_key(|&s| (lengths[s], s));
    let mut codes = vec![(0u32, 0u8); lengths.len()];
    let mut code = 0u32;
    let mut prev_len = 0u8;
    for &s in &order {
        code <<= lengths[s] - prev_len;
        prev_len = lengths[s];
        codes[s] = (code, lengths[s]);
        code += 1;
    }
    codes
}

/// Encode `symbols` as a canonical-Huffman bitstream (MSB-first), padded
/// with zero bits to a byte boundary.
pub fn huffman_encode(symbols: &[u16], table: &FrequencyTable) -> Result<Vec<u8>> {
    let lengths = code_lengths(table);
    let codes = canonical_codes(&lengths);
    let mut out = Vec::new();
    let mut acc: u64 = 0;
    let mut nbits: u32 = 0;
    for &sym in symbols {
        let (code, len) = codes
            .get(sym as usize)
            .copied()
            .filter(|&(_, l)| l > 0)
            .ok_or(Error::ZeroFrequency(sym as u32))?;
        acc = (acc << len) | code as u64;
        nbits += len as u32;
        while nbits >= 8 {
            out.push((acc >> (nbits - 8)) as u8);
            nbits -= 8;
        }
    }
    if nbits > 0 {
        out.push(((acc << (8 - nbits)) & 0xFF) as u8);
    }
    Ok(out)
}

/// Decode exactly `n` symbols from a canonical-Huffman bitstream; pad bits
/// after the last symbol must be zero and no whole byte may be left over.
pub fn huffman_decode(bytes: &[u8], table: &FrequencyTable, n: usize) -> Result<Vec<u16>> {
    let lengths = code_lengths(table);
    // canonical decode tables per length: first code, first index, count
    let mut order: Vec<usize> = (0..lengths.len()).filter(|&s| lengths[s] > 0).collect();
    order.sort_by_key(|&s| (lengths[s], s));
    let mut first_code = [0u32; MAX_CODE_LEN + 1];
    let mut first_idx = [0usize; MAX_CODE_LEN + 1];
    let mut count = [0u32; MAX_CODE_LEN + 1];
    for &s in &order {
        count[lengths[s] as usize] += 1;
    }
    {
        let mut code = 0u32;
        let mut idx = 0usize;
        for len in 1..=MAX_CODE_LEN {
            first_code[len] = code;
            first_idx[len] = idx;
            code = (code + count[len]) << 1;
            idx += count[len] as usize;
        }
    }

    let mut out = Vec::with_capacity(n);
    let mut bitpos = 0usize;
    let total_bits = bytes.len() * 8;
    for _ in 0..n {
        let mut code = 0u32;
        let mut len = 0usize;
        loop {
            if bitpos >= total_bits {
                return Err(Error::CorruptStream("huffman stream truncated".into()));
            }
            let bit = (bytes[bitpos / 8] >> (7 - bitpos % 8)) & 1;
            bitpos += 1;
            code = (code << 1) | bit as u32;
            len += 1;
            if len > MAX_CODE_LEN {
                return Err(Error::CorruptStream("huffman code overlong".into()));
            }
            let offset = code.wrapping_sub(first_code[len]);
            if count[len] > 0 && offset < count[len] {
                out.push(order[first_idx[len] + offset as usize] as u16);
                break;
            }
        }
    }
    // strictness: only zero pad bits inside the final byte may remain
    if total_bits - bitpos >= 8 {
        return Err(Error::CorruptStream(format!(
            "huffman stream has {} leftover bytes",
            (total_bits - bitpos) / 8
        )));
    }
    while bitpos < total_bits {
        if (bytes[bitpos / 8] >> (7 - bitpos % 8)) & 1 != 0 {
            return Err(Error::CorruptStream("huffman pad bits not zero".into()));
        }
        bitpos += 1;
    }
    Ok(out)
}
