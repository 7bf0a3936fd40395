//! Debug Access Port transactions and the control-register constants the
//! test procedure writes.

use serde::{Deserialize, Serialize};

/// Debug Halting Control and Status Register (ARMv7-M debug space).
pub const DHCSR_ADDR: u32 = 0xE000_EDF0;
/// DBGKEY in the upper halfword plus C_HALT | C_DEBUGEN.
pub const DHCSR_HALT_ENABLE: u32 = 0xA05F_0003;
/// Key that must be present in DHCSR\[31:16\] for a write to take effect.
pub const DHCSR_KEY: u32 = 0xA05F;
pub const DHCSR_C_DEBUGEN: u32 = 1 << 0;
pub const DHCSR_C_HALT: u32 = 1 << 1;

/// Writing 1 here pulses the core reset; with MEM MAP set the core comes up
/// executing from SRAM.
pub const CORE_RESET_ADDR: u32 = 0x4400_0004;
/// MEM MAP control bit: maps SRAM into the core's boot region.
pub const MEM_MAP_ADDR: u32 = 0x4400_0008;

/// One word read or write through the DAP. Addresses are word-aligned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum DapTransaction {
    Read { addr: u32 },
    Write { addr: u32, data: u32 },
}

impl DapTransaction {
    pub fn read(addr: u32) -> Self {
        assert_eq!(addr % 4, 0, "DAP address {addr:#010X} not word-aligned");
        DapTransaction::Read { addr }
    }

    pub fn write(addr: u32, data: u32) -> Self {
        assert_eq!(addr % 4, 0, "DAP address {addr:#010X} not word-aligned");
        DapTransaction::Write { addr, data }
    }

    pub fn addr(&self) -> u32 {
        match *self {
            DapTransaction::Read { addr } | DapTransaction::Write { addr, .. } => addr,
        }
    }
}

/// Transaction enabling debug mode: halts the core and opens SRAM access.
pub fn dhcsr_debug_enable() -> DapTransaction {
    DapTransaction::write(DHCSR_ADDR, DHCSR_HALT_ENABLE)
}

/// Transaction releasing the core out of reset.
pub fn core_reset_txn() -> DapTransaction {
    DapTransaction::write(CORE_RESET_ADDR, 1)
}

/// Transaction setting the MEM MAP bit.
pub fn mem_map_txn() -> DapTransaction {
    DapTransaction::write(MEM_MAP_ADDR, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canned_transactions() {
        assert_eq!(
            dhcsr_debug_enable(),
            DapTransaction::Write {
                addr: 0xE000_EDF0,
                data: 0xA05F_0003
            }
        );
        assert_eq!(
            core_reset_txn(),
            DapTransaction::Write {
                addr: 0x4400_0004,
                data: 1
            }
        );
        assert_eq!(
            mem_map_txn(),
            DapTransaction::Write {
                addr: 0x4400_0008,
                data: 1
            }
        );
    }

    #[test]
    #[should_panic(expected = "not word-aligned")]
    fn unaligned_address_panics() {
        DapTransaction::read(0x2000_0002);
    }
}
