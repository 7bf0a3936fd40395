//! Scan-chain image codec.
//!
//! The chain is a 226-bit serial interface on the Michigan chip and 225 bits
//! on the UCLA chip; the missing bit is CORE_RESET. Field layout (bit 0
//! shifted first):
//!
//! | bits          | field                          |
//! |---------------|--------------------------------|
//! | 0             | RESET (whole chip)             |
//! | 1             | CORE_RESET (Michigan only)     |
//! | next 8        | PLL multiplier M, LSB first    |
//! | next 8        | PLL divider N, LSB first       |
//! | next 1        | clock select (0 HCLK, 1 PLL)   |
//! | remaining 207 | reserved, must be zero         |

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bits::BitVector;
use crate::chip::ChipVariant;

/// Reference clock feeding the on-chip PLL, in MHz.
pub const PLL_REF_MHZ: f64 = 20.0;

pub const RESERVED_BITS: usize = 207;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScanError {
    #[error("scan image is {found} bits, variant expects {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("UCLA scan chain has no CORE_RESET bit")]
    CoreResetOnUcla,
    #[error("Michigan scan image requires a CORE_RESET bit")]
    CoreResetMissing,
    #[error("reserved scan bit {index} is set")]
    ReservedBitsSet { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClkSel {
    Hclk,
    Pll,
}

impl std::fmt::Display for ClkSel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClkSel::Hclk => write!(f, "HCLK"),
            ClkSel::Pll => write!(f, "PLL"),
        }
    }
}

/// On-chip PLL control word. With `sel = Pll` the internal clock runs at
/// 20 MHz x M / N; otherwise it follows the external HCLK reference.
/// M and N of zero encode an unconfigured PLL (the all-zero chain image).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PllConfig {
    #[serde(rename = "m")]
    pub mult_m: u8,
    #[serde(rename = "n")]
    pub div_n: u8,
    #[serde(rename = "sel")]
    pub clk_sel: ClkSel,
}

impl PllConfig {
    pub fn new(mult_m: u8, div_n: u8, clk_sel: ClkSel) -> Self {
        Self {
            mult_m,
            div_n,
            clk_sel,
        }
    }

    pub const fn zeroed() -> Self {
        Self {
            mult_m: 0,
            div_n: 0,
            clk_sel: ClkSel::Hclk,
        }
    }

    /// Internal clock frequency in MHz given the HCLK reference frequency.
    /// An unconfigured divider (N = 0) reads as an unlocked PLL, 0 MHz.
    pub fn frequency_mhz(&self, f_hclk_mhz: f64) -> f64 {
        match self.clk_sel {
            ClkSel::Hclk => f_hclk_mhz,
            ClkSel::Pll => {
                if self.div_n == 0 {
                    0.0
                } else {
                    PLL_REF_MHZ * f64::from(self.mult_m) / f64::from(self.div_n)
                }
            }
        }
    }
}

impl Default for PllConfig {
    fn default() -> Self {
        Self::zeroed()
    }
}

/// Decoded contents of one scan-chain image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanImage {
    pub reset: bool,
    /// Present on Michigan chains only.
    pub core_reset: Option<bool>,
    pub pll: PllConfig,
}

impl ScanImage {
    pub fn zeroed(variant: ChipVariant) -> Self {
        Self {
            reset: false,
            core_reset: match variant {
                ChipVariant::Michigan => Some(false),
                ChipVariant::Ucla => None,
            },
            pll: PllConfig::zeroed(),
        }
    }

    /// Projection onto the UCLA chain: drops the CORE_RESET field.
    pub fn drop_core_reset(&self) -> ScanImage {
        ScanImage {
            reset: self.reset,
            core_reset: None,
            pll: self.pll,
        }
    }
}

struct Layout {
    core_reset: Option<usize>,
    mult: usize,
    div: usize,
    sel: usize,
}

fn layout(variant: ChipVariant) -> Layout {
    match variant {
        ChipVariant::Michigan => Layout {
            core_reset: Some(1),
            mult: 2,
            div: 10,
            sel: 18,
        },
        ChipVariant::Ucla => Layout {
            core_reset: None,
            mult: 1,
            div: 9,
            sel: 17,
        },
    }
}

fn put_byte(bits: &mut BitVector, at: usize, value: u8) {
    for i in 0..8 {
        bits.set(at + i, value & (1 << i) != 0);
    }
}

fn get_byte(bits: &BitVector, at: usize) -> u8 {
    let mut value = 0u8;
    for i in 0..8 {
        if bits.get(at + i) {
            value |= 1 << i;
        }
    }
    value
}

pub fn encode_scan(image: &ScanImage, variant: ChipVariant) -> Result<BitVector, ScanError> {
    match (variant, image.core_reset) {
        (ChipVariant::Ucla, Some(_)) => return Err(ScanError::CoreResetOnUcla),
        (ChipVariant::Michigan, None) => return Err(ScanError::CoreResetMissing),
        _ => {}
    }
    let lay = layout(variant);
    let mut bits = BitVector::zeros(variant.scan_length());
    bits.set(0, image.reset);
    if let (Some(at), Some(cr)) = (lay.core_reset, image.core_reset) {
        bits.set(at, cr);
    }
    put_byte(&mut bits, lay.mult, image.pll.mult_m);
    put_byte(&mut bits, lay.div, image.pll.div_n);
    bits.set(lay.sel, image.pll.clk_sel == ClkSel::Pll);
    Ok(bits)
}

/// Field extraction without the reserved-bit check. The chip model uses this
/// directly: hardware latches whatever was shifted in.
pub(crate) fn extract_fields(bits: &BitVector, variant: ChipVariant) -> ScanImage {
    let lay = layout(variant);
    ScanImage {
        reset: bits.get(0),
        core_reset: lay.core_reset.map(|at| bits.get(at)),
        pll: PllConfig {
            mult_m: get_byte(bits, lay.mult),
            div_n: get_byte(bits, lay.div),
            clk_sel: if bits.get(lay.sel) {
                ClkSel::Pll
            } else {
                ClkSel::Hclk
            },
        },
    }
}

pub fn decode_scan(bits: &BitVector, variant: ChipVariant) -> Result<ScanImage, ScanError> {
    if bits.len() != variant.scan_length() {
        return Err(ScanError::LengthMismatch {
            expected: variant.scan_length(),
            found: bits.len(),
        });
    }
    let lay = layout(variant);
    for index in lay.sel + 1..bits.len() {
        if bits.get(index) {
            return Err(ScanError::ReservedBitsSet { index });
        }
    }
    Ok(extract_fields(bits, variant))
}
