//! Intel-HEX program image parser.
//!
//! Accepts record types 00 (data), 01 (end of file) and 04 (extended linear
//! address). Every record's checksum is verified: the sum of all record
//! bytes including the checksum must be zero mod 256. Parsing stops at the
//! EOF record; a stream without one is rejected, as is data written twice
//! to the same address.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HexError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: checksum mismatch")]
    BadChecksum { line: usize },
    #[error("line {line}: overlapping data at {addr:#010X}")]
    OverlappingData { line: usize, addr: u32 },
    #[error("no end-of-file record")]
    MissingEof,
}

/// A parsed firmware image: a sparse byte map keyed by absolute address.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HexImage {
    bytes: BTreeMap<u32, u8>,
}

impl HexImage {
    /// Builds an image directly from a contiguous byte run.
    pub fn from_bytes(base_addr: u32, data: &[u8]) -> Self {
        Self {
            bytes: data
                .iter()
                .enumerate()
                .map(|(i, &b)| (base_addr + i as u32, b))
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    /// Lowest address present, 0 for an empty image.
    pub fn base_addr(&self) -> u32 {
        self.bytes.keys().next().copied().unwrap_or(0)
    }

    pub fn get(&self, addr: u32) -> Option<u8> {
        self.bytes.get(&addr).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u8)> + '_ {
        self.bytes.iter().map(|(&a, &b)| (a, b))
    }

    /// The image flattened to a contiguous run starting at the base address.
    /// Gaps between records are filled with zero.
    pub fn contiguous_bytes(&self) -> (u32, Vec<u8>) {
        let Some((&first, _)) = self.bytes.iter().next() else {
            return (0, Vec::new());
        };
        let &last = self.bytes.keys().next_back().expect("non-empty");
        let mut out = vec![0u8; (last - first + 1) as usize];
        for (&addr, &byte) in &self.bytes {
            out[(addr - first) as usize] = byte;
        }
        (first, out)
    }
}

fn hex_byte(s: &str, at: usize, line: usize) -> Result<u8, HexError> {
    let pair = s.get(at..at + 2).ok_or_else(|| HexError::MalformedRecord {
        line,
        reason: "record truncated".into(),
    })?;
    u8::from_str_radix(pair, 16).map_err(|_| HexError::MalformedRecord {
        line,
        reason: format!("invalid hex digits {pair:?}"),
    })
}

pub fn parse_hex_image(text: &str) -> Result<HexImage, HexError> {
    let mut image = HexImage::default();
    let mut upper: u32 = 0;
    let mut saw_eof = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let rec = raw.trim_end_matches('\r');
        if rec.is_empty() {
            continue;
        }
        let Some(body) = rec.strip_prefix(':') else {
            return Err(HexError::MalformedRecord {
                line,
                reason: "record does not start with ':'".into(),
            });
        };
        if body.len() % 2 != 0 {
            return Err(HexError::MalformedRecord {
                line,
                reason: "odd number of hex digits".into(),
            });
        }
        let mut bytes = Vec::with_capacity(body.len() / 2);
        for at in (0..body.len()).step_by(2) {
            bytes.push(hex_byte(body, at, line)?);
        }
        if bytes.len() < 5 {
            return Err(HexError::MalformedRecord {
                line,
                reason: "record shorter than the minimum 5 bytes".into(),
            });
        }
        let count = bytes[0] as usize;
        if bytes.len() != count + 5 {
            return Err(HexError::MalformedRecord {
                line,
                reason: format!("length field {count} does not match record size"),
            });
        }
        let sum: u8 = bytes.iter().fold(0u8, |acc, &b| acc.wrapping_add(b));
        if sum != 0 {
            return Err(HexError::BadChecksum { line });
        }
        let offset = (u32::from(bytes[1]) << 8) | u32::from(bytes[2]);
        match bytes[3] {
            0x00 => {
                for (i, &byte) in bytes[4..4 + count].iter().enumerate() {
                    let addr = upper | (offset + i as u32);
                    if image.bytes.insert(addr, byte).is_some() {
                        return Err(HexError::OverlappingData { line, addr });
                    }
                }
            }
            0x01 => {
                if count != 0 {
                    return Err(HexError::MalformedRecord {
                        line,
                        reason: "EOF record carries data".into(),
                    });
                }
                saw_eof = true;
                break;
            }
            0x04 => {
                if count != 2 {
                    return Err(HexError::MalformedRecord {
                        line,
                        reason: "extended linear address record must hold 2 bytes".into(),
                    });
                }
                upper = (u32::from(bytes[4]) << 24) | (u32::from(bytes[5]) << 16);
            }
            other => {
                return Err(HexError::MalformedRecord {
                    line,
                    reason: format!("unsupported record type {other:#04x}"),
                });
            }
        }
    }

    if !saw_eof {
        return Err(HexError::MissingEof);
    }
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eof_only_is_empty() {
        let image = parse_hex_image(":00000001FF\n").unwrap();
        assert!(image.is_empty());
    }

    #[test]
    fn data_record_lands_at_offset() {
        let image = parse_hex_image(":0400100001020304E2\n:00000001FF\n").unwrap();
        assert_eq!(image.len(), 4);
        assert_eq!(image.base_addr(), 0x0010);
        assert_eq!(image.get(0x0010), Some(0x01));
        assert_eq!(image.get(0x0013), Some(0x04));
    }

    #[test]
    fn bad_checksum_rejected() {
        assert_eq!(
            parse_hex_image(":0400100001020304E3\n:00000001FF\n").unwrap_err(),
            HexError::BadChecksum { line: 1 }
        );
    }

    #[test]
    fn missing_eof_rejected() {
        assert_eq!(
            parse_hex_image(":0400100001020304E2\n").unwrap_err(),
            HexError::MissingEof
        );
    }

    #[test]
    fn overlap_rejected() {
        let err = parse_hex_image(":0100100001EE\n:0100100002ED\n:00000001FF\n").unwrap_err();
        assert_eq!(
            err,
            HexError::OverlappingData {
                line: 2,
                addr: 0x0010
            }
        );
    }

    #[test]
    fn extended_linear_address() {
        let image =
            parse_hex_image(":020000042000DA\n:040000001122334452\n:00000001FF\n").unwrap();
        assert_eq!(image.base_addr(), 0x2000_0000);
        assert_eq!(image.get(0x2000_0003), Some(0x44));
    }

    #[test]
    fn contiguous_fills_gaps_with_zero() {
        let image = parse_hex_image(":01001000AA45\n:01001200BB32\n:00000001FF\n").unwrap();
        let (base, bytes) = image.contiguous_bytes();
        assert_eq!(base, 0x0010);
        assert_eq!(bytes, vec![0xAA, 0x00, 0xBB]);
    }

    #[test]
    fn unsupported_record_type_rejected() {
        let err = parse_hex_image(":0400000300003800C1\n:00000001FF\n").unwrap_err();
        assert!(matches!(err, HexError::MalformedRecord { line: 1, .. }));
    }
}
