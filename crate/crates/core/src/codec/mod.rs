//! Compression: spatial sorting, quantization, vector quantization,
//! entropy coding, and the bundle container that ties them together.
//!
//! The three entropy coders (rANS, canonical Huffman, and a
//! carry-propagating range coder) all drive off the same 12-bit
//! normalized frequency table, so they are interchangeable per bundle
//! and must decode identical symbol streams.

pub mod arith;
pub mod bundle;
pub mod crc;
pub mod freq;
pub mod huffman;
pub mod morton;
pub mod quant;
pub mod rans;
pub mod vq;

pub use arith::{arith_decode, arith_encode};
pub use bundle::{
    decode_bundle, encode_bundle, CodecConfig, CoderKind, EncodeStats, EncodedBundle, MAGIC,
    VERSION, VQ12_DIM, VQ3_DIM,
};
pub use crc::crc32;
pub use freq::{build_freq_table, estimate_rate_bits, FrequencyTable, FREQ_BITS, FREQ_TOTAL};
pub use huffman::{huffman_decode, huffman_encode};
pub use morton::{interleave3, morton_key, morton_sort, MORTON_BITS};
pub use quant::QuantGrid;
pub use rans::{rans_decode, rans_encode};
pub use vq::{fit_codebook, Codebook};
