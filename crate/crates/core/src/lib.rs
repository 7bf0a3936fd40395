//! Simulated closed-loop variability characterization platform for a
//! customized Cortex-M3 test chip.
//!
//! The crate models the whole desk setup: seeded chip populations with
//! injectable process variability ([`chip`]), bit-exact wire codecs
//! ([`codecs`]), the DAC-referenced power path with sequencing ([`power`]),
//! the current/leakage/frequency measurement chains ([`sensing`]), the
//! master/slave controller pair running the twelve-step test procedure
//! ([`controller`]), and sweep orchestration with CSV export and
//! statistics ([`sweep`], [`export`], [`stats`]). Recorded traces replay
//! deterministically ([`replay`]).

pub mod budget;
pub mod chip;
pub mod codecs;
pub mod config;
pub mod controller;
pub mod export;
pub mod power;
pub mod record;
pub mod replay;
pub mod sensing;
pub mod stats;
pub mod sweep;
pub mod trace;

pub use chip::{Chip, ChipError, ChipVariant, CoreStatus, LeakDevice, ModelConfig};
pub use codecs::{BitVector, DapTransaction, HexImage, I2cFrame, PllConfig, ScanImage};
pub use config::{parse_config, SweepConfig};
pub use controller::{
    builtin_program, MasterConfig, MasterStep, MeasurePlan, RunOutcome, RunRecord, SyncMessage,
    TestProgram,
};
pub use export::{export_csv, parse_csv};
pub use power::{Board, PowerSequence, Rail, RailSpec};
pub use record::MeasurementRecord;
pub use sensing::{AdcSpec, FreqGateSpec, LeakageChainSpec, SenseChannelSpec};
pub use stats::{summarize, SummaryStats};
pub use sweep::{run_single, run_sweep, ExecMode};
pub use trace::{Trace, TraceEvent};
