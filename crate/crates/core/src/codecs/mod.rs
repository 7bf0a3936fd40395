//! Bit-exact codecs for every payload the controllers put on a wire:
//! scan-chain images, DAP transactions, DAC I2C frames and Intel-HEX
//! program images. All operations here are pure functions.

pub mod bits;
pub mod dap;
pub mod hex;
pub mod i2c;
pub mod scan;

pub use bits::{BitVector, BitsError};
pub use dap::{core_reset_txn, dhcsr_debug_enable, mem_map_txn, DapTransaction};
pub use hex::{parse_hex_image, HexError, HexImage};
pub use i2c::{dac_frame, dac_frame_at, parse_dac_frame, DacFrameError, I2cFrame};
pub use scan::{decode_scan, encode_scan, ClkSel, PllConfig, ScanError, ScanImage};
