//! Run trace: one JSON object per wire event, written as JSON lines.
//!
//! Every event carries its simulation timestamp and the controller that
//! produced it. DAC frames, scan shifts, DAP transfers and sensor
//! transactions are logged verbatim; together with the chip seed they are
//! sufficient to replay a run (see [`crate::replay`]).

use serde::{Deserialize, Serialize};

use crate::codecs::i2c::I2cFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Master,
    Slave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceKind {
    RunStart {
        chip_id: u32,
        grid_index: u32,
        chip_seed: u64,
        variant: String,
        vcore_mv: u32,
        vsram_mv: u32,
        pll_m: u8,
        pll_n: u8,
        clk_sel: String,
    },
    /// Declarative behavior of the program at the moment it is loaded.
    ProgramBehavior {
        latency_ns: u64,
        result_addr: String,
        output: Vec<String>,
    },
    DacFrame {
        addr7: u8,
        payload_hex: String,
    },
    ScanShift {
        bits_len: usize,
        bits_hex: String,
    },
    BaseReset,
    DapEnable,
    DapWrite {
        addr: String,
        data: String,
    },
    DapRead {
        addr: String,
        /// Word returned by the chip, or "fault" if the access errored.
        data: String,
    },
    Sync {
        msg: String,
    },
    Step {
        n: u8,
        name: String,
    },
    RoCount {
        ro_idx: u8,
        raw_code: u16,
    },
    AdcSample {
        channel: String,
        raw_code: u16,
    },
    LeakSample {
        channel: String,
        raw_code: u16,
    },
    RunEnd {
        result_ok: bool,
        outcome: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t_ns: u64,
    pub source: Source,
    #[serde(flatten)]
    pub kind: TraceKind,
}

/// Collects trace events for one run. A disabled trace drops everything,
/// which keeps large statistical sweeps cheap.
#[derive(Debug, Clone)]
pub struct Trace {
    events: Vec<TraceEvent>,
    enabled: bool,
}

impl Trace {
    pub fn enabled() -> Self {
        Self {
            events: Vec::new(),
            enabled: true,
        }
    }

    pub fn disabled() -> Self {
        Self {
            events: Vec::new(),
            enabled: false,
        }
    }

    pub fn push(&mut self, t_ns: u64, source: Source, kind: TraceKind) {
        if self.enabled {
            self.events.push(TraceEvent { t_ns, source, kind });
        }
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&serde_json::to_string(event).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect()
    }
}

pub fn hex_addr(addr: u32) -> String {
    format!("{addr:#010x}")
}

pub fn hex_word(word: u32) -> String {
    format!("{word:#010x}")
}

pub fn dac_frame_kind(frame: &I2cFrame) -> TraceKind {
    TraceKind::DacFrame {
        addr7: frame.addr7,
        payload_hex: frame.payload_hex(),
    }
}
