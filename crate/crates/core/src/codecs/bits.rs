//! Fixed-length bit vectors as shifted on the scan chain.
//!
//! Bit 0 is the first bit on the wire. The hex form used for logging packs
//! bit 0 into the most significant bit of the first byte; trailing pad bits
//! in the last byte must be zero.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitsError {
    #[error("hex string holds {found} bits, expected at least {expected}")]
    HexTooShort { expected: usize, found: usize },
    #[error("invalid hex character {0:?}")]
    InvalidHexChar(char),
    #[error("nonzero padding past bit {len}")]
    NonZeroPadding { len: usize },
}

/// A bit sequence of fixed length, index 0 shifted first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    bits: Vec<bool>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            bits: vec![false; len],
        }
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        self.bits[idx] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    /// Copies of the vector with one bit removed; used to relate the two
    /// scan-chain variants in tests.
    pub fn without_bit(&self, idx: usize) -> BitVector {
        let mut bits = self.bits.clone();
        bits.remove(idx);
        Self { bits }
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Hex encoding for logs: bit 0 lands in the MSB of the first byte.
    pub fn to_hex(&self) -> String {
        let n_bytes = self.bits.len().div_ceil(8);
        let mut out = String::with_capacity(n_bytes * 2);
        for byte_idx in 0..n_bytes {
            let mut byte = 0u8;
            for bit in 0..8 {
                let idx = byte_idx * 8 + bit;
                if idx < self.bits.len() && self.bits[idx] {
                    byte |= 1 << (7 - bit);
                }
            }
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    /// Inverse of [`to_hex`](Self::to_hex) for a known bit length.
    pub fn from_hex(hex: &str, len: usize) -> Result<Self, BitsError> {
        let mut raw = Vec::with_capacity(hex.len() * 4);
        for ch in hex.chars() {
            let nibble = ch.to_digit(16).ok_or(BitsError::InvalidHexChar(ch))? as u8;
            for bit in 0..4 {
                raw.push(nibble & (1 << (3 - bit)) != 0);
            }
        }
        if raw.len() < len {
            return Err(BitsError::HexTooShort {
                expected: len,
                found: raw.len(),
            });
        }
        if raw[len..].iter().any(|&b| b) {
            return Err(BitsError::NonZeroPadding { len });
        }
        raw.truncate(len);
        Ok(Self { bits: raw })
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector(len={}, 0x{})", self.len(), self.to_hex())
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_round_trip_odd_length() {
        let mut v = BitVector::zeros(13);
        v.set(0, true);
        v.set(12, true);
        let hex = v.to_hex();
        assert_eq!(hex, "8008");
        let back = BitVector::from_hex(&hex, 13).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn nonzero_padding_rejected() {
        // 13 bits but bit 13 of the hex image is set.
        let err = BitVector::from_hex("8004", 13).unwrap_err();
        assert_eq!(err, BitsError::NonZeroPadding { len: 13 });
    }

    #[test]
    fn without_bit_shrinks() {
        let mut v = BitVector::zeros(4);
        v.set(1, true);
        let w = v.without_bit(1);
        assert_eq!(w.len(), 3);
        assert_eq!(w.count_ones(), 0);
    }
}
