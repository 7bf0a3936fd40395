//! Master and slave controller state machines for the closed-loop test
//! procedure.
//!
//! The master owns the DAC (power sequencing and sweeps), the scan chain
//! and the JTAG/DAP path; the slave owns the sensing chains. Both run as
//! deterministic state machines interleaved on the single simulation
//! timeline: every time the master advances the clock, the slave gets a
//! chance to fire its scheduled samples. Their I2C synchronization is a
//! lossless in-order message exchange: one Start when the measurement
//! window opens, Progress heartbeats while the slave works, and a final
//! Results hand-over carrying the complete measurement record.
//!
//! A full run executes twelve numbered steps, in order: DAC init, PLL
//! scan, chip reset, DAP enable, debug halt, program load, MEM MAP, core
//! reset release, result polling, slave sync, (the slave's parallel
//! measurement window spans reset through polling,) and the final record.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chip::{Chip, ChipError, CoreStatus, ProgramBehavior};
use crate::codecs::dap::{core_reset_txn, dhcsr_debug_enable, mem_map_txn, DapTransaction};
use crate::codecs::hex::HexImage;
use crate::codecs::scan::{encode_scan, PllConfig, ScanError, ScanImage};
use crate::power::{
    power_up, set_rail_voltage, Board, PowerError, PowerSequence, Rail,
};
use crate::record::{LeakReadings, MeasurementRecord, SaturationFlags};
use crate::sensing::{
    current_from_code, current_to_adc, fmax_estimate, freq_from_count, leakage_from_code,
    leakage_to_adc, measure_frequency, FreqGateSpec, LeakageChainSpec, Measurement,
    SenseChannelSpec,
};
use crate::trace::{dac_frame_kind, hex_addr, hex_word, Source, Trace, TraceKind};
use crate::chip::LeakDevice;

/// Wire-time costs of the master's operations.
const SCAN_SHIFT_NS: u64 = 250_000;
const DAP_TXN_NS: u64 = 20_000;
const DAP_ENABLE_NS: u64 = 20_000;
const BASE_RESET_NS: u64 = 50_000;
const DAC_ADJUST_NS: u64 = 100_000;
const SYNC_MSG_NS: u64 = 10_000;
const RECORD_NS: u64 = 10_000;
const ADC_SAMPLE_NS: u64 = 10_000;
/// Guard so a straggling slave cannot hold the window open forever.
const WINDOW_HARD_CAP_EXTRA_NS: u64 = 200_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("program load requires a halted core")]
    NotHalted,
    #[error("program does not fit: {0}")]
    ProgramDoesNotFit(String),
    #[error("verify mismatch at {addr:#010x}: wrote {wrote:#010x}, read {read:#010x}")]
    VerifyMismatch { addr: u32, wrote: u32, read: u32 },
    #[error("sync protocol violation: {0}")]
    ProtocolViolation(String),
    #[error(transparent)]
    Chip(#[from] ChipError),
}

/// Hard failures of a run's setup; dynamic run faults land in the record.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Chip(#[from] ChipError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

/// The master's numbered steps. Step 11 is the slave's measurement window
/// and has no master-side timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MasterStep {
    DacInit,
    PllScan,
    BaseReset,
    DapEnable,
    DebugHalt,
    LoadProgram,
    MemMap,
    CoreReset,
    ReadResults,
    SyncSlave,
    Record,
}

impl MasterStep {
    pub const ALL: [MasterStep; 11] = [
        MasterStep::DacInit,
        MasterStep::PllScan,
        MasterStep::BaseReset,
        MasterStep::DapEnable,
        MasterStep::DebugHalt,
        MasterStep::LoadProgram,
        MasterStep::MemMap,
        MasterStep::CoreReset,
        MasterStep::ReadResults,
        MasterStep::SyncSlave,
        MasterStep::Record,
    ];

    pub fn number(self) -> u8 {
        match self {
            MasterStep::DacInit => 1,
            MasterStep::PllScan => 2,
            MasterStep::BaseReset => 3,
            MasterStep::DapEnable => 4,
            MasterStep::DebugHalt => 5,
            MasterStep::LoadProgram => 6,
            MasterStep::MemMap => 7,
            MasterStep::CoreReset => 8,
            MasterStep::ReadResults => 9,
            MasterStep::SyncSlave => 10,
            MasterStep::Record => 12,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MasterStep::DacInit => "dac_init",
            MasterStep::PllScan => "pll_scan",
            MasterStep::BaseReset => "base_reset",
            MasterStep::DapEnable => "dap_enable",
            MasterStep::DebugHalt => "debug_halt",
            MasterStep::LoadProgram => "load_program",
            MasterStep::MemMap => "mem_map",
            MasterStep::CoreReset => "core_reset",
            MasterStep::ReadResults => "read_results",
            MasterStep::SyncSlave => "sync_slave",
            MasterStep::Record => "record",
        }
    }
}

/// I2C synchronization message between the two controllers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SyncMessage {
    Start,
    Progress,
    Results(MeasurementRecord),
}

/// A program staged for the chip: its image, where it loads, and what the
/// master expects back. The behavioral latency and output stand in for
/// actual execution.
#[derive(Debug, Clone, PartialEq)]
pub struct TestProgram {
    pub image: HexImage,
    pub base_addr: u32,
    pub latency_ns: u64,
    pub result_addr: u32,
    pub expected_words: Vec<u32>,
}

impl TestProgram {
    /// The image flattened to little-endian words, zero-padded to a word
    /// boundary.
    pub fn words(&self) -> Vec<u32> {
        let (_, bytes) = self.image.contiguous_bytes();
        bytes
            .chunks(4)
            .map(|chunk| {
                let mut word = [0u8; 4];
                word[..chunk.len()].copy_from_slice(chunk);
                u32::from_le_bytes(word)
            })
            .collect()
    }

    pub fn behavior(&self) -> ProgramBehavior {
        ProgramBehavior {
            latency_ns: self.latency_ns,
            result_addr: self.result_addr,
            output: self.expected_words.clone(),
        }
    }

    pub fn validate(&self, sram_base: u32, sram_bytes: u32) -> Result<(), ControllerError> {
        let end = sram_base as u64 + sram_bytes as u64;
        let image_end = self.base_addr as u64 + 4 * self.words().len() as u64;
        if self.base_addr % 4 != 0 || self.result_addr % 4 != 0 {
            return Err(ControllerError::ProgramDoesNotFit(
                "addresses must be word-aligned".into(),
            ));
        }
        if (self.base_addr as u64) < sram_base as u64 || image_end > end {
            return Err(ControllerError::ProgramDoesNotFit(format!(
                "image {:#010x}..{image_end:#x} outside SRAM",
                self.base_addr
            )));
        }
        let result_end = self.result_addr as u64 + 4 * self.expected_words.len() as u64;
        if (self.result_addr as u64) < sram_base as u64 || result_end > end {
            return Err(ControllerError::ProgramDoesNotFit(format!(
                "result range {:#010x}..{result_end:#x} outside SRAM",
                self.result_addr
            )));
        }
        if self.expected_words.is_empty() {
            return Err(ControllerError::ProgramDoesNotFit(
                "expected_words must not be empty".into(),
            ));
        }
        Ok(())
    }
}

/// The stock test program: 32 bytes of image, four marker words written
/// 1 ms after release.
pub fn builtin_program(sram_base: u32) -> TestProgram {
    let image_bytes: Vec<u8> = (0..32u8).map(|i| i.wrapping_mul(0x11) ^ 0x3C).collect();
    TestProgram {
        image: HexImage::from_bytes(sram_base, &image_bytes),
        base_addr: sram_base,
        latency_ns: 1_000_000,
        result_addr: sram_base + 0x100,
        expected_words: vec![0x600D_F00D, 0xC0DE_CAFE, 0x0000_002A, 0xFEED_FACE],
    }
}

/// What the slave measures and how.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurePlan {
    pub ro_indices: Vec<u8>,
    pub gate: FreqGateSpec,
    pub core_channel: SenseChannelSpec,
    pub sram_channel: SenseChannelSpec,
    pub leak_chain: LeakageChainSpec,
    pub sleep_sample_delay_ns: u64,
    /// fmax estimate = kappa x the slowest measured oscillator.
    pub kappa: f64,
}

impl Default for MeasurePlan {
    fn default() -> Self {
        Self {
            ro_indices: (0..8).collect(),
            gate: FreqGateSpec::default(),
            core_channel: SenseChannelSpec::core(0.0),
            sram_channel: SenseChannelSpec::sram(0.0),
            leak_chain: LeakageChainSpec::default(),
            sleep_sample_delay_ns: 1_000_000,
            kappa: 1.0,
        }
    }
}

/// Knobs of the master's wait loop and fault injection.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterConfig {
    pub poll_period_ns: u64,
    pub timeout_ns: u64,
    /// Skips one of steps 4..=8 to demonstrate the sequence is necessary.
    pub fault_skip_step: Option<u8>,
    /// Replaces the loaded program's behavior; the chip then produces
    /// different output than the master expects.
    pub behavior_override: Option<ProgramBehavior>,
}

impl Default for MasterConfig {
    fn default() -> Self {
        Self {
            poll_period_ns: 100_000,
            timeout_ns: 100_000_000,
            fault_skip_step: None,
            behavior_override: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    Completed,
    Timeout,
    VerifyMismatch,
    LatchUp,
    OverCurrent,
}

impl std::fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RunOutcome::Completed => "completed",
            RunOutcome::Timeout => "timeout",
            RunOutcome::VerifyMismatch => "verify_mismatch",
            RunOutcome::LatchUp => "latch_up",
            RunOutcome::OverCurrent => "over_current",
        };
        write!(f, "{s}")
    }
}

/// Everything the master records for one point: the configuration echo,
/// the slave's measurements, the verdict, and per-step completion times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub vcore_mv: u32,
    pub vsram_mv: u32,
    pub pll: PllConfig,
    pub measurement: MeasurementRecord,
    pub result_ok: bool,
    pub outcome: RunOutcome,
    /// Step number -> completion time. Skipped/unreached steps are absent.
    pub step_t_ns: BTreeMap<u8, u64>,
    /// Chip-level faults swallowed while the master pressed on.
    pub dap_faults: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSettings {
    pub vcore_mv: u32,
    pub vsram_mv: u32,
    pub pll: PllConfig,
}

#[derive(Debug, Clone, Copy)]
pub struct RunIds {
    pub chip_id: u32,
    pub grid_index: u32,
}

/// Loads a program through the DAP with word-wise read-back verification.
/// Returns the number of words written. Requires a halted core and an
/// enabled DAP; this is the bare operation, without trace or timing.
pub fn load_program(chip: &mut Chip, program: &TestProgram) -> Result<usize, ControllerError> {
    if !chip.dap_enabled() {
        return Err(ControllerError::Chip(ChipError::DapDisabled));
    }
    if chip.core.status != CoreStatus::Halted {
        return Err(ControllerError::NotHalted);
    }
    let words = program.words();
    for (i, &word) in words.iter().enumerate() {
        let addr = program.base_addr + 4 * i as u32;
        chip.dap_access(DapTransaction::write(addr, word))?;
    }
    for (i, &word) in words.iter().enumerate() {
        let addr = program.base_addr + 4 * i as u32;
        let read = chip.dap_access(DapTransaction::read(addr))?;
        if read != word {
            return Err(ControllerError::VerifyMismatch {
                addr,
                wrote: word,
                read,
            });
        }
    }
    chip.set_program_behavior(program.behavior());
    Ok(words.len())
}

/// Assembles the sync conversation for one run: the window-open Start, a
/// Progress heartbeat, and the Results hand-over.
pub fn sync_exchange(_master_t_ns: u64, slave_record: &MeasurementRecord) -> Vec<SyncMessage> {
    vec![
        SyncMessage::Start,
        SyncMessage::Progress,
        SyncMessage::Results(slave_record.clone()),
    ]
}

/// Receive-side check: exactly one Start, and it precedes any Results.
pub fn validate_sync(messages: &[SyncMessage]) -> Result<(), ControllerError> {
    let starts = messages
        .iter()
        .filter(|m| matches!(m, SyncMessage::Start))
        .count();
    if starts != 1 {
        return Err(ControllerError::ProtocolViolation(format!(
            "expected exactly one Start, saw {starts}"
        )));
    }
    let start_at = messages
        .iter()
        .position(|m| matches!(m, SyncMessage::Start))
        .expect("counted above");
    if let Some(results_at) = messages
        .iter()
        .position(|m| matches!(m, SyncMessage::Results(_)))
    {
        if results_at < start_at {
            return Err(ControllerError::ProtocolViolation(
                "Results before Start".into(),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SlaveAction {
    SramSample,
    LeakSample(LeakDevice),
    RoCount(u8),
}

/// The slave controller: schedules its sensor transactions when the window
/// opens and fires them as simulated time passes. Current samples for the
/// active and sleep windows are event-triggered off the observed core
/// state.
struct SlaveMachine<'a> {
    plan: &'a MeasurePlan,
    started_at: Option<u64>,
    schedule: Vec<(u64, SlaveAction)>,
    next_action: usize,
    seen_running: bool,
    sleep_due: Option<u64>,
    progress_sent: bool,
    sensors_absent: bool,
    i_core_active: Option<Measurement>,
    i_core_sleep: Option<Measurement>,
    i_sram: Option<Measurement>,
    leaks: [Option<Measurement>; 4],
    ro_freqs: Vec<(u8, u16, Measurement)>,
    sample_t_ns: Vec<(String, u64)>,
}

impl<'a> SlaveMachine<'a> {
    fn new(plan: &'a MeasurePlan) -> Self {
        Self {
            plan,
            started_at: None,
            schedule: Vec::new(),
            next_action: 0,
            seen_running: false,
            sleep_due: None,
            progress_sent: false,
            sensors_absent: false,
            i_core_active: None,
            i_core_sleep: None,
            i_sram: None,
            leaks: [None; 4],
            ro_freqs: Vec::new(),
            sample_t_ns: Vec::new(),
        }
    }

    /// Start message received: the measurement window is open.
    fn start(&mut self, chip: &Chip, t_ns: u64) {
        self.started_at = Some(t_ns);
        self.sensors_absent = !chip.variant.has_sensors();
        let mut at = t_ns + ADC_SAMPLE_NS;
        self.schedule.push((at, SlaveAction::SramSample));
        if !self.sensors_absent {
            for device in LeakDevice::ALL {
                at += self.plan.leak_chain.t_int_ns();
                self.schedule.push((at, SlaveAction::LeakSample(device)));
            }
            for &idx in &self.plan.ro_indices {
                at += self.plan.gate.gate_ns() + ADC_SAMPLE_NS;
                self.schedule.push((at, SlaveAction::RoCount(idx)));
            }
        }
    }

    fn poll(&mut self, chip: &Chip, trace: &mut Trace) {
        if self.started_at.is_none() {
            return;
        }
        let now = chip.sim_time_ns;

        while self.next_action < self.schedule.len() && self.schedule[self.next_action].0 <= now {
            let (_, action) = self.schedule[self.next_action];
            self.next_action += 1;
            self.run_action(action, chip, trace, now);
        }

        if !self.seen_running && chip.core.status == CoreStatus::Running && !chip.core.latchup {
            let code = current_to_adc(chip.current_draw(Rail::CoreVdd), &self.plan.core_channel);
            trace.push(
                now,
                Source::Slave,
                TraceKind::AdcSample {
                    channel: "i_core_active".into(),
                    raw_code: code,
                },
            );
            self.i_core_active = Some(current_from_code(code, &self.plan.core_channel));
            self.sample_t_ns.push(("i_core_active".into(), now));
            self.seen_running = true;
        }

        if self.seen_running && self.sleep_due.is_none() && chip.core.status == CoreStatus::Sleep
        {
            self.sleep_due = Some(now + self.plan.sleep_sample_delay_ns);
        }
        if let Some(due) = self.sleep_due {
            if self.i_core_sleep.is_none() && now >= due {
                let code =
                    current_to_adc(chip.current_draw(Rail::CoreVdd), &self.plan.core_channel);
                trace.push(
                    now,
                    Source::Slave,
                    TraceKind::AdcSample {
                        channel: "i_core_sleep".into(),
                        raw_code: code,
                    },
                );
                self.i_core_sleep = Some(current_from_code(code, &self.plan.core_channel));
                self.sample_t_ns.push(("i_core_sleep".into(), now));
            }
        }

        if !self.progress_sent && self.next_action == self.schedule.len() {
            trace.push(
                now,
                Source::Slave,
                TraceKind::Sync {
                    msg: "progress".into(),
                },
            );
            self.progress_sent = true;
        }
    }

    fn run_action(&mut self, action: SlaveAction, chip: &Chip, trace: &mut Trace, now: u64) {
        match action {
            SlaveAction::SramSample => {
                let code =
                    current_to_adc(chip.current_draw(Rail::SramVdd), &self.plan.sram_channel);
                trace.push(
                    now,
                    Source::Slave,
                    TraceKind::AdcSample {
                        channel: "i_sram".into(),
                        raw_code: code,
                    },
                );
                self.i_sram = Some(current_from_code(code, &self.plan.sram_channel));
                self.sample_t_ns.push(("i_sram".into(), now));
            }
            SlaveAction::LeakSample(device) => {
                if let Ok(i_na) = chip.leakage_current(device) {
                    let code = leakage_to_adc(i_na, &self.plan.leak_chain);
                    trace.push(
                        now,
                        Source::Slave,
                        TraceKind::LeakSample {
                            channel: device.to_string(),
                            raw_code: code,
                        },
                    );
                    self.leaks[LeakDevice::ALL.iter().position(|&d| d == device).unwrap()] =
                        Some(leakage_from_code(code, &self.plan.leak_chain));
                    self.sample_t_ns.push((format!("leak_{device}"), now));
                }
            }
            SlaveAction::RoCount(idx) => {
                if let Ok(count) = measure_frequency(chip, idx as usize, &self.plan.gate) {
                    trace.push(
                        now,
                        Source::Slave,
                        TraceKind::RoCount {
                            ro_idx: idx,
                            raw_code: count,
                        },
                    );
                    self.ro_freqs
                        .push((idx, count, freq_from_count(count, &self.plan.gate)));
                    self.sample_t_ns.push((format!("ro_{idx}"), now));
                }
            }
        }
    }

    /// Whether the slave has everything it can collect for a healthy run.
    fn done(&self) -> bool {
        self.started_at.is_some()
            && self.next_action == self.schedule.len()
            && self.i_core_active.is_some()
            && self.i_core_sleep.is_some()
    }

    fn into_measurement(
        self,
        ids: RunIds,
        point: &PointSettings,
        chip: &Chip,
        result_ok: bool,
    ) -> MeasurementRecord {
        let mut saturation = SaturationFlags::default();
        let take = |m: Option<Measurement>, flag: &mut bool| {
            m.map(|m| {
                *flag |= m.saturated;
                m.value
            })
        };
        let i_core_active = take(self.i_core_active, &mut saturation.i_core_active);
        let i_core_sleep = take(self.i_core_sleep, &mut saturation.i_core_sleep);
        let i_sram = take(self.i_sram, &mut saturation.i_sram);
        let [rvtp, rvtn, hvtp, hvtn] = self.leaks;
        let leak_na = LeakReadings {
            rvtp_na: take(rvtp, &mut saturation.leak_rvtp),
            rvtn_na: take(rvtn, &mut saturation.leak_rvtn),
            hvtp_na: take(hvtp, &mut saturation.leak_hvtp),
            hvtn_na: take(hvtn, &mut saturation.leak_hvtn),
        };
        let freqs: Vec<f64> = self
            .ro_freqs
            .iter()
            .map(|(_, _, m)| {
                saturation.freq |= m.saturated;
                m.value
            })
            .collect();
        MeasurementRecord {
            chip_id: ids.chip_id,
            variant: chip.variant,
            vcore_mv: point.vcore_mv,
            vsram_mv: point.vsram_mv,
            pll: point.pll,
            f_clk_mhz: point.pll.frequency_mhz(chip.config().f_hclk_mhz),
            i_core_active_ma: i_core_active,
            i_core_sleep_ma: i_core_sleep,
            i_sram_ma: i_sram,
            leak_na,
            fmax_est_mhz: fmax_estimate(&freqs, self.plan.kappa),
            saturation,
            result_ok,
            sensors_absent: self.sensors_absent,
            seed: chip.params.seed,
            sample_t_ns: self.sample_t_ns,
        }
    }
}

/// Runs the full closed-loop procedure for one point on one chip.
///
/// Dynamic faults (latch-up, over-current, verify mismatch, timeout) are
/// recorded in the returned [`RunRecord`]; `Err` is reserved for setup
/// errors such as a program that cannot fit in SRAM.
pub fn master_run(
    chip: &mut Chip,
    board: &mut Board,
    sequence: &PowerSequence,
    program: &TestProgram,
    point: &PointSettings,
    plan: &MeasurePlan,
    cfg: &MasterConfig,
    ids: RunIds,
    trace: &mut Trace,
) -> Result<RunRecord, RunError> {
    program.validate(chip.config().sram_base, chip.config().sram_bytes())?;
    let run = PointRun {
        chip,
        board,
        sequence,
        program,
        point,
        cfg,
        ids,
        trace,
        slave: SlaveMachine::new(plan),
        step_t_ns: BTreeMap::new(),
        dap_faults: Vec::new(),
    };
    run.execute()
}

struct PointRun<'a> {
    chip: &'a mut Chip,
    board: &'a mut Board,
    sequence: &'a PowerSequence,
    program: &'a TestProgram,
    point: &'a PointSettings,
    cfg: &'a MasterConfig,
    ids: RunIds,
    trace: &'a mut Trace,
    slave: SlaveMachine<'a>,
    step_t_ns: BTreeMap<u8, u64>,
    dap_faults: Vec<String>,
}

impl PointRun<'_> {
    fn now(&self) -> u64 {
        self.chip.sim_time_ns
    }

    fn advance(&mut self, dt_ns: u64) {
        self.chip.step(dt_ns);
        self.slave.poll(self.chip, self.trace);
    }

    fn advance_to(&mut self, t_ns: u64) {
        if t_ns > self.now() {
            self.advance(t_ns - self.now());
        }
    }

    fn mark(&mut self, step: MasterStep) {
        self.step_t_ns.insert(step.number(), self.now());
        self.trace.push(
            self.now(),
            Source::Master,
            TraceKind::Step {
                n: step.number(),
                name: step.name().into(),
            },
        );
    }

    fn skipped(&self, step: MasterStep) -> bool {
        self.cfg.fault_skip_step == Some(step.number())
    }

    /// DAP transaction with continue-on-fault semantics: the payload went
    /// on the wire either way, the master cannot see a dead port.
    fn dap(&mut self, txn: DapTransaction) -> Option<u32> {
        self.advance(DAP_TXN_NS);
        let result = self.chip.dap_access(txn);
        let kind = match (&txn, &result) {
            (DapTransaction::Write { addr, data }, _) => TraceKind::DapWrite {
                addr: hex_addr(*addr),
                data: hex_word(*data),
            },
            (DapTransaction::Read { addr }, Ok(word)) => TraceKind::DapRead {
                addr: hex_addr(*addr),
                data: hex_word(*word),
            },
            (DapTransaction::Read { addr }, Err(_)) => TraceKind::DapRead {
                addr: hex_addr(*addr),
                data: "fault".into(),
            },
        };
        self.trace.push(self.now(), Source::Master, kind);
        match result {
            Ok(word) => Some(word),
            Err(err) => {
                self.dap_faults.push(err.to_string());
                None
            }
        }
    }

    fn failed(mut self, outcome: RunOutcome) -> RunRecord {
        let plan = self.slave.plan;
        let slave = std::mem::replace(&mut self.slave, SlaveMachine::new(plan));
        let measurement = slave.into_measurement(self.ids, self.point, self.chip, false);
        self.trace.push(
            self.now(),
            Source::Master,
            TraceKind::RunEnd {
                result_ok: false,
                outcome: outcome.to_string(),
            },
        );
        RunRecord {
            vcore_mv: self.point.vcore_mv,
            vsram_mv: self.point.vsram_mv,
            pll: self.point.pll,
            measurement,
            result_ok: false,
            outcome,
            step_t_ns: self.step_t_ns,
            dap_faults: self.dap_faults,
        }
    }

    fn execute(mut self) -> Result<RunRecord, RunError> {
        let point = *self.point;
        self.trace.push(
            self.now(),
            Source::Master,
            TraceKind::RunStart {
                chip_id: self.ids.chip_id,
                grid_index: self.ids.grid_index,
                chip_seed: self.chip.params.seed,
                variant: self.chip.variant.to_string(),
                vcore_mv: point.vcore_mv,
                vsram_mv: point.vsram_mv,
                pll_m: point.pll.mult_m,
                pll_n: point.pll.div_n,
                clk_sel: point.pll.clk_sel.to_string(),
            },
        );

        // Step 1: write the DAC over I2C; rails come up in sequence order,
        // then the two adjustable rails move to the sweep point.
        let t0 = self.now();
        let up_plan = power_up(
            self.sequence,
            &mut self.board.dac,
            &self.board.rails,
            self.board.dac_addr7,
        )?;
        let total_dwell: u64 = self.sequence.steps().iter().map(|s| s.dwell_ns).sum();
        for (t_rel, frame) in &up_plan {
            self.advance_to(t0 + t_rel);
            let kind = dac_frame_kind(frame);
            match self.board.apply_frame(self.chip, frame) {
                Ok(()) => {}
                Err(PowerError::OverCurrent { .. }) => {
                    self.trace.push(self.now(), Source::Master, kind);
                    return Ok(self.failed(RunOutcome::OverCurrent));
                }
                Err(err) => return Err(err.into()),
            }
            self.trace.push(self.now(), Source::Master, kind);
        }
        self.advance_to(t0 + total_dwell);
        for (rail, mv) in [
            (Rail::CoreVdd, point.vcore_mv),
            (Rail::SramVdd, point.vsram_mv),
        ] {
            let frame = set_rail_voltage(
                self.board.spec(rail),
                f64::from(mv),
                &self.board.bounds,
                self.board.dac.vref_mv,
                self.board.dac_addr7,
            )?;
            self.advance(DAC_ADJUST_NS);
            let kind = dac_frame_kind(&frame);
            match self.board.apply_frame(self.chip, &frame) {
                Ok(()) => {}
                Err(PowerError::OverCurrent { .. }) => {
                    self.trace.push(self.now(), Source::Master, kind);
                    return Ok(self.failed(RunOutcome::OverCurrent));
                }
                Err(err) => return Err(err.into()),
            }
            self.trace.push(self.now(), Source::Master, kind);
        }
        if self.chip.core.latchup {
            return Ok(self.failed(RunOutcome::LatchUp));
        }
        self.mark(MasterStep::DacInit);

        // Step 2: configure the PLL through the scan chain. Michigan
        // carries the CORE_RESET bit, UCLA does not.
        let pll_image = ScanImage {
            reset: false,
            core_reset: match self.chip.variant {
                crate::chip::ChipVariant::Michigan => Some(false),
                crate::chip::ChipVariant::Ucla => None,
            },
            pll: point.pll,
        };
        self.shift(&pll_image)?;
        self.mark(MasterStep::PllScan);

        // Step 3: whole-chip reset. UCLA asserts and releases the scan
        // RESET bit; Michigan pulses the dedicated pin.
        match self.chip.variant {
            crate::chip::ChipVariant::Ucla => {
                self.shift(&ScanImage {
                    reset: true,
                    ..pll_image
                })?;
                self.shift(&ScanImage {
                    reset: false,
                    ..pll_image
                })?;
            }
            crate::chip::ChipVariant::Michigan => {
                self.advance(BASE_RESET_NS);
                self.chip.base_reset()?;
                self.trace
                    .push(self.now(), Source::Master, TraceKind::BaseReset);
            }
        }
        self.mark(MasterStep::BaseReset);

        // The measurement window opens: Start goes to the slave.
        self.trace.push(
            self.now(),
            Source::Master,
            TraceKind::Sync { msg: "start".into() },
        );
        let window_open = self.now();
        let chip_ref: &Chip = self.chip;
        self.slave.start(chip_ref, window_open);

        // Step 4: bring up the DAP.
        if !self.skipped(MasterStep::DapEnable) {
            self.advance(DAP_ENABLE_NS);
            if let Err(err) = self.chip.enable_dap() {
                self.dap_faults.push(err.to_string());
            }
            self.trace
                .push(self.now(), Source::Master, TraceKind::DapEnable);
            self.mark(MasterStep::DapEnable);
        }

        // Step 5: enable debug mode (halts the core, opens SRAM access).
        if !self.skipped(MasterStep::DebugHalt) {
            self.dap(dhcsr_debug_enable());
            self.mark(MasterStep::DebugHalt);
        }

        // Step 6: load the program word-wise and read every word back.
        if !self.skipped(MasterStep::LoadProgram) {
            let words = self.program.words();
            for (i, &word) in words.iter().enumerate() {
                let addr = self.program.base_addr + 4 * i as u32;
                self.dap(DapTransaction::write(addr, word));
            }
            let mut verified = true;
            for (i, &word) in words.iter().enumerate() {
                let addr = self.program.base_addr + 4 * i as u32;
                match self.dap(DapTransaction::read(addr)) {
                    Some(read) if read == word => {}
                    _ => {
                        verified = false;
                        break;
                    }
                }
            }
            if !verified {
                return Ok(self.failed(RunOutcome::VerifyMismatch));
            }
            let behavior = self
                .cfg
                .behavior_override
                .clone()
                .unwrap_or_else(|| self.program.behavior());
            self.trace.push(
                self.now(),
                Source::Master,
                TraceKind::ProgramBehavior {
                    latency_ns: behavior.latency_ns,
                    result_addr: hex_addr(behavior.result_addr),
                    output: behavior.output.iter().map(|&w| hex_word(w)).collect(),
                },
            );
            self.chip.set_program_behavior(behavior);
            self.mark(MasterStep::LoadProgram);
        }

        // Step 7: set the MEM MAP bit.
        if !self.skipped(MasterStep::MemMap) {
            self.dap(mem_map_txn());
            self.mark(MasterStep::MemMap);
        }

        // Step 8: release the core out of reset.
        if !self.skipped(MasterStep::CoreReset) {
            self.dap(core_reset_txn());
            self.mark(MasterStep::CoreReset);
        }

        // Step 9: wait for the expected words, then keep the window open
        // until the slave finishes its plan.
        let t9_start = self.now();
        let mut results_seen = false;
        let outcome = loop {
            self.advance(self.cfg.poll_period_ns);
            if !results_seen {
                let mut all_match = true;
                for (i, &expected) in self.program.expected_words.iter().enumerate() {
                    let addr = self.program.result_addr + 4 * i as u32;
                    match self.dap(DapTransaction::read(addr)) {
                        Some(word) if word == expected => {}
                        _ => {
                            all_match = false;
                        }
                    }
                }
                results_seen = all_match;
            }
            if results_seen && self.slave.done() {
                break RunOutcome::Completed;
            }
            let waited = self.now() - t9_start;
            if !results_seen && waited >= self.cfg.timeout_ns {
                break RunOutcome::Timeout;
            }
            if waited >= self.cfg.timeout_ns + WINDOW_HARD_CAP_EXTRA_NS {
                break RunOutcome::Completed;
            }
        };
        if self.chip.core.latchup {
            return Ok(self.failed(RunOutcome::LatchUp));
        }
        if outcome == RunOutcome::Timeout {
            return Ok(self.failed(RunOutcome::Timeout));
        }
        self.mark(MasterStep::ReadResults);

        // Step 10: the slave hands its record over.
        self.advance(SYNC_MSG_NS);
        self.trace.push(
            self.now(),
            Source::Slave,
            TraceKind::Sync {
                msg: "results".into(),
            },
        );
        let plan = self.slave.plan;
        let slave = std::mem::replace(&mut self.slave, SlaveMachine::new(plan));
        let measurement = slave.into_measurement(self.ids, &point, self.chip, true);
        let transcript = sync_exchange(self.now(), &measurement);
        validate_sync(&transcript).expect("the live exchange is ordered");
        self.mark(MasterStep::SyncSlave);

        // Step 12: record the data with the DAC and PLL settings.
        self.advance(RECORD_NS);
        self.mark(MasterStep::Record);
        self.trace.push(
            self.now(),
            Source::Master,
            TraceKind::RunEnd {
                result_ok: true,
                outcome: RunOutcome::Completed.to_string(),
            },
        );
        Ok(RunRecord {
            vcore_mv: point.vcore_mv,
            vsram_mv: point.vsram_mv,
            pll: point.pll,
            measurement,
            result_ok: true,
            outcome: RunOutcome::Completed,
            step_t_ns: self.step_t_ns,
            dap_faults: self.dap_faults,
        })
    }

    fn shift(&mut self, image: &ScanImage) -> Result<(), RunError> {
        let bits = encode_scan(image, self.chip.variant)?;
        self.advance(SCAN_SHIFT_NS);
        self.chip.shift_scan(&bits)?;
        self.trace.push(
            self.now(),
            Source::Master,
            TraceKind::ScanShift {
                bits_len: bits.len(),
                bits_hex: bits.to_hex(),
            },
        );
        Ok(())
    }
}
