//! I2C frames for the 8-channel 12-bit DAC.
//!
//! A DAC command is three payload bytes: `0x30 | channel` (write-and-update),
//! then the 12-bit code left-justified across the next two bytes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default 7-bit device address of the DAC.
pub const DEFAULT_DAC_ADDR7: u8 = 0x48;

/// Command nibble for "write to channel register and update output".
const CMD_WRITE_UPDATE: u8 = 0x3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DacFrameError {
    #[error("DAC frame payload is {0} bytes, expected 3")]
    BadLength(usize),
    #[error("unsupported DAC command nibble {0:#x}")]
    BadCommand(u8),
    #[error("DAC channel {0} out of range 0..8")]
    BadChannel(u8),
}

/// One addressed I2C write as put on the bus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct I2cFrame {
    pub addr7: u8,
    pub payload: Vec<u8>,
}

impl I2cFrame {
    pub fn payload_hex(&self) -> String {
        self.payload.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Frame setting `channel` (0..8) to the 12-bit `code` at the default
/// device address.
pub fn dac_frame(channel: u8, code: u16) -> I2cFrame {
    dac_frame_at(DEFAULT_DAC_ADDR7, channel, code)
}

pub fn dac_frame_at(addr7: u8, channel: u8, code: u16) -> I2cFrame {
    assert!(channel < 8, "DAC channel {channel} out of range");
    assert!(code < 4096, "DAC code {code} out of range");
    I2cFrame {
        addr7,
        payload: vec![
            (CMD_WRITE_UPDATE << 4) | channel,
            (code >> 4) as u8,
            ((code & 0xF) << 4) as u8,
        ],
    }
}

/// Receive side of the simulated DAC: recovers `(channel, code)`.
pub fn parse_dac_frame(frame: &I2cFrame) -> Result<(u8, u16), DacFrameError> {
    if frame.payload.len() != 3 {
        return Err(DacFrameError::BadLength(frame.payload.len()));
    }
    let cmd = frame.payload[0] >> 4;
    if cmd != CMD_WRITE_UPDATE {
        return Err(DacFrameError::BadCommand(cmd));
    }
    let channel = frame.payload[0] & 0x0F;
    if channel >= 8 {
        return Err(DacFrameError::BadChannel(channel));
    }
    let code = (u16::from(frame.payload[1]) << 4) | u16::from(frame.payload[2] >> 4);
    Ok((channel, code))
}
