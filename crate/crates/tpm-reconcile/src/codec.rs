//! Reversible transformation between raw key bits and TPM weights.
//!
//! A key of `n = b * K * N` bits is cut into `K * N` blocks of `b` bits.
//! Each block, read most-significant-bit first, is an unsigned value
//! `v` in `[0, 2^b - 1]`; the weight is `v - 2^(b-1)`. The half-width
//! follows as `L = 2^(b-1)`, so weights span exactly `[-L, L-1]` and
//! the block map is a bijection. Blocks fill the matrix row-major:
//! weight `[k][j]` comes from block `k * N + j`.

use serde::de;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tpm::WeightMatrix;

/// Smallest supported block size.
pub const MIN_BLOCK_BITS: u32 = 1;

/// Largest supported block size; keeps `L = 2^(b-1)` within
/// [`crate::tpm::MAX_HALF_WIDTH`].
pub const MAX_BLOCK_BITS: u32 = 21;

/// An ordered sequence of bits, the raw key material.
///
/// Displayed, parsed, and serialized as an ASCII string of `'0'`/`'1'`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitString {
    bits: Vec<u8>,
}

impl BitString {
    /// The empty bit string.
    pub fn new() -> Self {
        BitString::default()
    }

    /// Validates that every element is 0 or 1.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        for (index, &b) in bits.iter().enumerate() {
            if b > 1 {
                return Err(Error::Codec(format!(
                    "bit value {b} at index {index} is not 0 or 1"
                )));
            }
        }
        Ok(BitString { bits })
    }

    /// The bits, one byte per bit, values 0 or 1.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Length in bits.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    /// True when the string holds no bits.
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of positions at which the two strings differ.
    pub fn hamming_distance(&self, other: &BitString) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::Codec(format!(
                "cannot compare {}-bit and {}-bit strings",
                self.len(),
                other.len()
            )));
        }
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count())
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for (index, c) in s.chars().enumerate() {
            match c {
                '0' => bits.push(0),
                '1' => bits.push(1),
                other => {
                    return Err(Error::Codec(format!(
                        "character {other:?} at index {index} is not '0' or '1'"
                    )))
                }
            }
        }
        Ok(BitString { bits })
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// `L = 2^(b-1)` for block size `b` in `[1, 21]`.
pub fn derive_halfwidth(block_bits: u32) -> Result<i32> {
    if !(MIN_BLOCK_BITS..=MAX_BLOCK_BITS).contains(&block_bits) {
        return Err(Error::InvalidParameter(format!(
            "block size must be in [{MIN_BLOCK_BITS}, {MAX_BLOCK_BITS}], got {block_bits}"
        )));
    }
    Ok(1 << (block_bits - 1))
}

/// Key length `n = b * K * N` in bits.
pub fn sequence_length(
    block_bits: u32,
    hidden_units: usize,
    inputs_per_unit: usize,
) -> Result<usize> {
    if block_bits < 1 || hidden_units < 1 || inputs_per_unit < 1 {
        return Err(Error::InvalidParameter(
            "sequence_length arguments must all be >= 1".into(),
        ));
    }
    (block_bits as usize)
        .checked_mul(hidden_units)
        .and_then(|v| v.checked_mul(inputs_per_unit))
        .ok_or_else(|| Error::InvalidParameter("sequence length overflows".into()))
}

/// Converts a key of exactly `b * K * N` bits into a `K x N` weight
/// matrix with half-width `L = 2^(b-1)`.
pub fn encode(
    bits: &BitString,
    block_bits: u32,
    hidden_units: usize,
    inputs_per_unit: usize,
) -> Result<WeightMatrix> {
    let half_width = derive_halfwidth(block_bits)?;
    let expected = sequence_length(block_bits, hidden_units, inputs_per_unit)?;
    if bits.len() != expected {
        return Err(Error::Codec(format!(
            "key has {} bits, need exactly {expected} for b={block_bits}, K={hidden_units}, N={inputs_per_unit}",
            bits.len()
        )));
    }
    let b = block_bits as usize;
    let raw = bits.bits();
    let mut values = Vec::with_capacity(hidden_units * inputs_per_unit);
    for block in raw.chunks_exact(b) {
        let mut v: i32 = 0;
        for &bit in block {
            v = (v << 1) | i32::from(bit);
        }
        values.push(v - half_width);
    }
    WeightMatrix::from_values(hidden_units, inputs_per_unit, half_width, values)
}

/// Exact inverse of [`encode`]: emits the `b`-bit MSB-first encoding of
/// `w + 2^(b-1)` for each weight, row-major.
///
/// Every weight must fit the `b`-bit range `[-2^(b-1), 2^(b-1) - 1]`;
/// the matrix's own half-width may be smaller than `2^(b-1)` but never
/// larger.
pub fn decode(weights: &WeightMatrix, block_bits: u32) -> Result<BitString> {
    let half_width = derive_halfwidth(block_bits)?;
    let mut bits = Vec::with_capacity(weights.values().len() * block_bits as usize);
    for (index, &w) in weights.values().iter().enumerate() {
        if w < -half_width || w > half_width - 1 {
            return Err(Error::Codec(format!(
                "weight {w} at index {index} not representable with b={block_bits}"
            )));
        }
        let v = (w + half_width) as u32;
        for shift in (0..block_bits).rev() {
            bits.push(((v >> shift) & 1) as u8);
        }
    }
    BitString::from_bits(bits)
}
