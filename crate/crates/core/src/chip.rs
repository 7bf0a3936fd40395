//! Behavioral model of one customized Cortex-M3 test chip.
//!
//! The model carries per-chip process variability (drawn once from seeded
//! distributions), power-state semantics with a sticky latch-up flag for
//! mis-sequenced rails, the debug-visible registers the test procedure
//! touches, 60 ring oscillators and four leakage monitor devices.
//!
//! There is no instruction emulation. A loaded program is a declarative
//! behavior: after its latency elapses while the core is running, the
//! output words appear at the result address and the core enters sleep.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codecs::bits::BitVector;
use crate::codecs::dap::{
    CORE_RESET_ADDR, DHCSR_ADDR, DHCSR_C_DEBUGEN, DHCSR_C_HALT, DHCSR_KEY, MEM_MAP_ADDR,
};
use crate::codecs::scan::{extract_fields, PllConfig};
use crate::codecs::DapTransaction;
use crate::power::Rail;

pub const RO_COUNT: usize = 60;

/// Voltage the current and frequency laws are normalized to.
const V_NOM_MV: f64 = 900.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChipError {
    #[error("access while the digital supply is down")]
    AccessWhileUnpowered,
    #[error("DAP has not been enabled")]
    DapDisabled,
    #[error("debug mode not enabled; SRAM is reachable only in debug mode")]
    DebugNotEnabled,
    #[error("address {addr:#010X} is not mapped")]
    UnmappedAddress { addr: u32 },
    #[error("scan image is {found} bits, chain is {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("this chip variant has no on-chip sensors")]
    SensorAbsent,
    #[error("sensor supply SENSEVDD is down")]
    SensorUnpowered,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid distribution parameter: {0}")]
    InvalidDistribution(String),
}

/// Which university's customization of the chip is socketed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChipVariant {
    Michigan,
    Ucla,
}

impl ChipVariant {
    /// Scan chain length in bits. The UCLA chain is one bit shorter; the
    /// missing bit is CORE_RESET.
    pub fn scan_length(&self) -> usize {
        match self {
            ChipVariant::Michigan => 226,
            ChipVariant::Ucla => 225,
        }
    }

    /// The Michigan chip does not carry the on-chip frequency and leakage
    /// sensors.
    pub fn has_sensors(&self) -> bool {
        matches!(self, ChipVariant::Ucla)
    }
}

impl std::fmt::Display for ChipVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChipVariant::Michigan => write!(f, "Michigan"),
            ChipVariant::Ucla => write!(f, "UCLA"),
        }
    }
}

/// Leakage monitor device: regular/high threshold, PMOS/NMOS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakDevice {
    Rvtp,
    Rvtn,
    Hvtp,
    Hvtn,
}

impl LeakDevice {
    pub const ALL: [LeakDevice; 4] = [
        LeakDevice::Rvtp,
        LeakDevice::Rvtn,
        LeakDevice::Hvtp,
        LeakDevice::Hvtn,
    ];

    fn index(self) -> usize {
        match self {
            LeakDevice::Rvtp => 0,
            LeakDevice::Rvtn => 1,
            LeakDevice::Hvtp => 2,
            LeakDevice::Hvtn => 3,
        }
    }
}

impl std::fmt::Display for LeakDevice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LeakDevice::Rvtp => write!(f, "rvtp"),
            LeakDevice::Rvtn => write!(f, "rvtn"),
            LeakDevice::Hvtp => write!(f, "hvtp"),
            LeakDevice::Hvtn => write!(f, "hvtn"),
        }
    }
}

/// Median leakage per device in nanoamps. Regular-threshold devices sit in
/// the tens of nanoamps; high-threshold an order of magnitude lower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeakMedians {
    pub rvtp_na: f64,
    pub rvtn_na: f64,
    pub hvtp_na: f64,
    pub hvtn_na: f64,
}

impl Default for LeakMedians {
    fn default() -> Self {
        Self {
            rvtp_na: 40.0,
            rvtn_na: 50.0,
            hvtp_na: 4.0,
            hvtn_na: 5.0,
        }
    }
}

impl LeakMedians {
    fn get(&self, dev: LeakDevice) -> f64 {
        match dev {
            LeakDevice::Rvtp => self.rvtp_na,
            LeakDevice::Rvtn => self.rvtn_na,
            LeakDevice::Hvtp => self.hvtp_na,
            LeakDevice::Hvtn => self.hvtn_na,
        }
    }
}

/// Quiescent current of the six fixed rails, in milliamps, while energized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedRailCurrentsMa {
    pub dvdd: f64,
    pub dvdd2: f64,
    pub avdd: f64,
    pub avdd2: f64,
    pub wrappervdd: f64,
    pub sensevdd: f64,
}

impl Default for FixedRailCurrentsMa {
    fn default() -> Self {
        Self {
            dvdd: 5.0,
            dvdd2: 3.0,
            avdd: 2.0,
            avdd2: 1.0,
            wrappervdd: 1.0,
            sensevdd: 2.0,
        }
    }
}

/// Model constants and variability distributions. All of these are knobs;
/// the defaults reproduce the platform's design-point numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// SRAM size in KiB, word-addressed from `sram_base`.
    pub sram_kib: u32,
    pub sram_base: u32,
    /// Nominal ring-oscillator frequency at 900 mV and 25 C.
    pub ro_f_nom_mhz: f64,
    /// Exponent of the RO voltage law (V / 0.9V)^alpha.
    pub alpha: f64,
    /// RO temperature derating per degree C away from 25 C.
    pub k_t_per_c: f64,
    /// Leakage exponential temperature coefficient per degree C.
    pub k_l_per_c: f64,
    pub temp_c: f64,
    /// Core current in active mode at 900 mV, scale 1.
    pub active_ma: f64,
    /// Core current in sleep/halt, scale 1.
    pub sleep_ma: f64,
    /// SRAM rail current, scale 1 (stable across modes).
    pub sram_ma: f64,
    /// Relative sigma of the per-chip active-current scale (truncated > 0).
    pub active_sigma: f64,
    /// Relative sigma of each RO's scale factor (truncated > 0).
    pub ro_sigma: f64,
    /// Log-domain sigma of the leakage bases (lognormal).
    pub leak_sigma: f64,
    pub leak_medians: LeakMedians,
    pub fixed_rail_ma: FixedRailCurrentsMa,
    /// External reference clock frequency.
    pub f_hclk_mhz: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            sram_kib: 64,
            sram_base: 0x2000_0000,
            ro_f_nom_mhz: 50.0,
            alpha: 1.3,
            k_t_per_c: 0.002,
            k_l_per_c: 0.08,
            temp_c: 25.0,
            active_ma: 15.0,
            sleep_ma: 1.0,
            sram_ma: 1.0,
            active_sigma: 0.05,
            ro_sigma: 0.05,
            leak_sigma: 0.8,
            leak_medians: LeakMedians::default(),
            fixed_rail_ma: FixedRailCurrentsMa::default(),
            f_hclk_mhz: 20.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, sigma) in [
            ("active_sigma", self.active_sigma),
            ("ro_sigma", self.ro_sigma),
            ("leak_sigma", self.leak_sigma),
        ] {
            if !sigma.is_finite() || sigma < 0.0 {
                return Err(ModelError::InvalidDistribution(format!(
                    "{name} must be finite and >= 0, got {sigma}"
                )));
            }
        }
        for (name, value) in [
            ("ro_f_nom_mhz", self.ro_f_nom_mhz),
            ("active_ma", self.active_ma),
            ("sleep_ma", self.sleep_ma),
            ("sram_ma", self.sram_ma),
            ("f_hclk_mhz", self.f_hclk_mhz),
            ("leak_medians.rvtp_na", self.leak_medians.rvtp_na),
            ("leak_medians.rvtn_na", self.leak_medians.rvtn_na),
            ("leak_medians.hvtp_na", self.leak_medians.hvtp_na),
            ("leak_medians.hvtn_na", self.leak_medians.hvtn_na),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(ModelError::InvalidDistribution(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if self.sram_kib == 0 {
            return Err(ModelError::InvalidDistribution(
                "sram_kib must be > 0".into(),
            ));
        }
        if self.sram_base % 4 != 0 {
            return Err(ModelError::InvalidDistribution(
                "sram_base must be word-aligned".into(),
            ));
        }
        Ok(())
    }

    pub fn sram_bytes(&self) -> u32 {
        self.sram_kib * 1024
    }
}

/// Per-chip variability drawn once at construction; fixed for the chip's
/// lifetime. Identical (seed, config) yields bit-identical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilityParams {
    pub seed: u64,
    pub active_scale: f64,
    pub ro_scale: Vec<f64>,
    pub leak_base_na: [f64; 4],
    pub temp_c: f64,
}

impl VariabilityParams {
    pub fn leak_base(&self, dev: LeakDevice) -> f64 {
        self.leak_base_na[dev.index()]
    }
}

fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return mean;
    }
    let dist = Normal::new(mean, sigma).expect("validated sigma");
    loop {
        let x = dist.sample(rng);
        if x > 0.0 {
            return x;
        }
    }
}

fn lognormal(rng: &mut ChaCha8Rng, median: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return median;
    }
    LogNormal::new(median.ln(), sigma)
        .expect("validated sigma")
        .sample(rng)
}

fn draw_params(seed: u64, cfg: &ModelConfig) -> VariabilityParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let active_scale = truncated_normal(&mut rng, 1.0, cfg.active_sigma);
    let ro_scale = (0..RO_COUNT)
        .map(|_| truncated_normal(&mut rng, 1.0, cfg.ro_sigma))
        .collect();
    let leak_base_na =
        LeakDevice::ALL.map(|dev| lognormal(&mut rng, cfg.leak_medians.get(dev), cfg.leak_sigma));
    // Consume one draw so future fields keep existing streams stable.
    let _: u64 = rng.gen();
    VariabilityParams {
        seed,
        active_scale,
        ro_scale,
        leak_base_na,
        temp_c: cfg.temp_c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreStatus {
    Unpowered,
    Reset,
    Halted,
    Running,
    Sleep,
}

/// Debug-visible core state. `latchup`, once set, persists until every rail
/// is back at 0 mV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoreState {
    pub status: CoreStatus,
    pub mem_map: bool,
    pub dhcsr: u32,
    pub latchup: bool,
}

impl CoreState {
    fn unpowered() -> Self {
        Self {
            status: CoreStatus::Unpowered,
            mem_map: false,
            dhcsr: 0,
            latchup: false,
        }
    }

    fn debug_enabled(&self) -> bool {
        self.dhcsr & DHCSR_C_DEBUGEN != 0
    }
}

/// Declarative stand-in for a loaded test program: after `latency_ns` of
/// run time the output words appear at `result_addr` and the core sleeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramBehavior {
    pub latency_ns: u64,
    pub result_addr: u32,
    pub output: Vec<u32>,
}

/// One simulated device under test.
#[derive(Debug, Clone, PartialEq)]
pub struct Chip {
    pub variant: ChipVariant,
    pub core: CoreState,
    pub pll: PllConfig,
    pub params: VariabilityParams,
    pub sim_time_ns: u64,
    cfg: ModelConfig,
    rails_mv: [f64; 8],
    sram: Vec<u32>,
    scan_chain: BitVector,
    dap_enabled: bool,
    reset_held: bool,
    core_reset_held: bool,
    program: Option<ProgramBehavior>,
    run_elapsed_ns: u64,
}

impl Chip {
    /// Builds a chip with all rails at 0 mV and variability drawn from the
    /// seeded distributions in `cfg`. Deterministic: the same
    /// (variant, seed, config) produces a bit-identical chip.
    pub fn new(variant: ChipVariant, seed: u64, cfg: ModelConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let params = draw_params(seed, &cfg);
        let words = (cfg.sram_bytes() / 4) as usize;
        Ok(Self {
            variant,
            core: CoreState::unpowered(),
            pll: PllConfig::zeroed(),
            params,
            sim_time_ns: 0,
            scan_chain: BitVector::zeros(variant.scan_length()),
            sram: vec![0; words],
            cfg,
            rails_mv: [0.0; 8],
            dap_enabled: false,
            reset_held: false,
            core_reset_held: false,
            program: None,
            run_elapsed_ns: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn rail_mv(&self, rail: Rail) -> f64 {
        self.rails_mv[rail.index()]
    }

    pub fn dap_enabled(&self) -> bool {
        self.dap_enabled
    }

    pub fn program(&self) -> Option<&ProgramBehavior> {
        self.program.as_ref()
    }

    /// Internal clock frequency per the latched PLL configuration.
    pub fn clock_mhz(&self) -> f64 {
        self.pll.frequency_mhz(self.cfg.f_hclk_mhz)
    }

    fn dvdd_up(&self) -> bool {
        self.rails_mv[Rail::Dvdd.index()] > 0.0
    }

    fn sram_powered(&self) -> bool {
        self.rails_mv[Rail::SramVdd.index()] > 0.0
    }

    fn sense_powered(&self) -> bool {
        self.rails_mv[Rail::SenseVdd.index()] > 0.0
    }

    /// Drives one rail to `mv`. Mis-sequencing is modeled as latch-up: a
    /// core-domain rail (COREVDD/SRAMVDD) energized while DVDD sits at 0
    /// sets the sticky flag, whichever rail moved last. Latch-up clears
    /// only on full power-down.
    ///
    /// # Panics
    /// If `mv` is outside 0..=3600.
    pub fn apply_rail(&mut self, rail: Rail, mv: f64) {
        assert!(
            (0.0..=3600.0).contains(&mv),
            "rail voltage {mv} mV out of range"
        );
        let old = self.rails_mv[rail.index()];
        self.rails_mv[rail.index()] = mv;

        match rail {
            Rail::Dvdd => {
                if old == 0.0 && mv > 0.0 {
                    // Digital domain comes up in reset with debug cleared.
                    self.core.status = CoreStatus::Reset;
                    self.core.mem_map = false;
                    self.core.dhcsr = 0;
                    self.dap_enabled = false;
                    self.run_elapsed_ns = 0;
                } else if old > 0.0 && mv == 0.0 {
                    self.core.status = CoreStatus::Unpowered;
                    self.core.mem_map = false;
                    self.core.dhcsr = 0;
                    self.dap_enabled = false;
                    self.reset_held = false;
                    self.core_reset_held = false;
                    self.program = None;
                    self.run_elapsed_ns = 0;
                    self.pll = PllConfig::zeroed();
                    self.scan_chain = BitVector::zeros(self.variant.scan_length());
                }
            }
            Rail::SramVdd => {
                if old > 0.0 && mv == 0.0 {
                    self.sram.fill(0);
                }
            }
            Rail::CoreVdd => {
                if old > 0.0 && mv == 0.0 && self.core.status != CoreStatus::Unpowered {
                    self.core.status = CoreStatus::Reset;
                    self.run_elapsed_ns = 0;
                }
            }
            _ => {}
        }

        let core_domain_up = self.rails_mv[Rail::CoreVdd.index()] > 0.0
            || self.rails_mv[Rail::SramVdd.index()] > 0.0;
        if core_domain_up && !self.dvdd_up() {
            self.core.latchup = true;
        }

        if self.rails_mv.iter().all(|&v| v == 0.0) {
            self.core = CoreState::unpowered();
        }
    }

    /// Models the JTAG power-up handshake that brings up the DAP.
    pub fn enable_dap(&mut self) -> Result<(), ChipError> {
        if !self.dvdd_up() {
            return Err(ChipError::AccessWhileUnpowered);
        }
        self.dap_enabled = true;
        Ok(())
    }

    /// Dedicated whole-chip reset pin (pulsed).
    pub fn base_reset(&mut self) -> Result<(), ChipError> {
        if !self.dvdd_up() {
            return Err(ChipError::AccessWhileUnpowered);
        }
        self.whole_chip_reset();
        Ok(())
    }

    fn whole_chip_reset(&mut self) {
        self.core.status = CoreStatus::Reset;
        self.core.mem_map = false;
        self.core.dhcsr = 0;
        self.dap_enabled = false;
        self.run_elapsed_ns = 0;
    }

    fn sram_index(&self, addr: u32) -> Option<usize> {
        let base = self.cfg.sram_base;
        if addr < base || addr >= base + self.cfg.sram_bytes() {
            return None;
        }
        Some(((addr - base) / 4) as usize)
    }

    /// One word transfer through the DAP. Requires DVDD up and the DAP
    /// enabled. SRAM transfers additionally require the SRAM rail and debug
    /// mode (the DHCSR enable bit): SRAM is reachable from outside only
    /// through the debug path.
    pub fn dap_access(&mut self, txn: DapTransaction) -> Result<u32, ChipError> {
        if !self.dvdd_up() {
            return Err(ChipError::AccessWhileUnpowered);
        }
        if !self.dap_enabled {
            return Err(ChipError::DapDisabled);
        }
        let addr = txn.addr();
        if addr % 4 != 0 {
            return Err(ChipError::UnmappedAddress { addr });
        }

        if addr == DHCSR_ADDR {
            return Ok(match txn {
                DapTransaction::Read { .. } => self.core.dhcsr,
                DapTransaction::Write { data, .. } => {
                    // Writes without the debug key are ignored by hardware.
                    if data >> 16 == DHCSR_KEY {
                        self.core.dhcsr = data & 0xFFFF;
                        if self.core.dhcsr & (DHCSR_C_DEBUGEN | DHCSR_C_HALT)
                            == (DHCSR_C_DEBUGEN | DHCSR_C_HALT)
                        {
                            self.core.status = CoreStatus::Halted;
                        }
                    }
                    data
                }
            });
        }
        if addr == CORE_RESET_ADDR {
            return Ok(match txn {
                DapTransaction::Read { .. } => 0,
                DapTransaction::Write { data, .. } => {
                    if data & 1 == 1 {
                        self.pulse_core_reset();
                    }
                    data
                }
            });
        }
        if addr == MEM_MAP_ADDR {
            return Ok(match txn {
                DapTransaction::Read { .. } => u32::from(self.core.mem_map),
                DapTransaction::Write { data, .. } => {
                    self.core.mem_map = data & 1 == 1;
                    data
                }
            });
        }

        if let Some(idx) = self.sram_index(addr) {
            if !self.sram_powered() {
                return Err(ChipError::AccessWhileUnpowered);
            }
            if !self.core.debug_enabled() {
                return Err(ChipError::DebugNotEnabled);
            }
            return Ok(match txn {
                DapTransaction::Read { .. } => self.sram[idx],
                DapTransaction::Write { data, .. } => {
                    self.sram[idx] = data;
                    data
                }
            });
        }

        Err(ChipError::UnmappedAddress { addr })
    }

    /// Core reset released: with MEM MAP set and no reset line held, the
    /// core comes up executing from SRAM.
    fn pulse_core_reset(&mut self) {
        self.run_elapsed_ns = 0;
        self.core.status = if self.core.mem_map && !self.reset_held && !self.core_reset_held {
            CoreStatus::Running
        } else {
            CoreStatus::Reset
        };
    }

    /// Shifts a full-length image through the scan chain and returns the
    /// previous chain contents. The latched image drives the PLL config and
    /// the reset lines; reserved bits are latched but ignored.
    pub fn shift_scan(&mut self, bits: &BitVector) -> Result<BitVector, ChipError> {
        if !self.dvdd_up() {
            return Err(ChipError::AccessWhileUnpowered);
        }
        if bits.len() != self.variant.scan_length() {
            return Err(ChipError::LengthMismatch {
                expected: self.variant.scan_length(),
                found: bits.len(),
            });
        }
        let previous = std::mem::replace(&mut self.scan_chain, bits.clone());
        let fields = extract_fields(bits, self.variant);
        self.pll = fields.pll;

        if fields.reset {
            self.whole_chip_reset();
            self.reset_held = true;
        } else if self.reset_held {
            // Release: MEM MAP was cleared by the reset, so the core stays
            // in reset until explicitly released via the CORE_RESET register.
            self.reset_held = false;
        }

        if let Some(cr) = fields.core_reset {
            if cr {
                self.core.status = CoreStatus::Reset;
                self.core_reset_held = true;
                self.run_elapsed_ns = 0;
            } else if self.core_reset_held {
                self.core_reset_held = false;
                self.core.status = if self.core.mem_map && !self.reset_held {
                    CoreStatus::Running
                } else {
                    CoreStatus::Reset
                };
                self.run_elapsed_ns = 0;
            }
        }
        Ok(previous)
    }

    /// Attaches the behavioral description of the program sitting in SRAM.
    pub fn set_program_behavior(&mut self, behavior: ProgramBehavior) {
        self.program = Some(behavior);
    }

    /// Advances simulated time. While the core runs (and is not latched
    /// up), program time accrues; once the program latency elapses its
    /// output words land at the result address and the core sleeps.
    pub fn step(&mut self, dt_ns: u64) {
        self.sim_time_ns += dt_ns;
        if self.core.status != CoreStatus::Running || self.core.latchup {
            return;
        }
        let Some(program) = self.program.clone() else {
            return;
        };
        self.run_elapsed_ns += dt_ns;
        if self.run_elapsed_ns >= program.latency_ns {
            if self.sram_powered() {
                for (i, &word) in program.output.iter().enumerate() {
                    let addr = program.result_addr + 4 * i as u32;
                    if let Some(idx) = self.sram_index(addr) {
                        self.sram[idx] = word;
                    }
                }
            }
            self.core.status = CoreStatus::Sleep;
        }
    }

    /// Current drawn from a rail in mA at its present voltage.
    ///
    /// COREVDD follows the active/idle law: `active_ma x scale x (V/0.9V)^2`
    /// while running, the idle constant in sleep/halt/reset, nothing when
    /// unpowered. SRAMVDD is stable whenever energized. The fixed rails
    /// draw their configured quiescent currents.
    pub fn current_draw(&self, rail: Rail) -> f64 {
        let v_mv = self.rails_mv[rail.index()];
        if v_mv == 0.0 {
            return 0.0;
        }
        match rail {
            Rail::CoreVdd => match self.core.status {
                CoreStatus::Running => {
                    let ratio = v_mv / V_NOM_MV;
                    self.cfg.active_ma * self.params.active_scale * ratio * ratio
                }
                CoreStatus::Sleep | CoreStatus::Halted | CoreStatus::Reset => {
                    self.cfg.sleep_ma * self.params.active_scale
                }
                CoreStatus::Unpowered => 0.0,
            },
            Rail::SramVdd => self.cfg.sram_ma * self.params.active_scale,
            Rail::Dvdd => self.cfg.fixed_rail_ma.dvdd,
            Rail::Dvdd2 => self.cfg.fixed_rail_ma.dvdd2,
            Rail::Avdd => self.cfg.fixed_rail_ma.avdd,
            Rail::Avdd2 => self.cfg.fixed_rail_ma.avdd2,
            Rail::WrapperVdd => self.cfg.fixed_rail_ma.wrappervdd,
            Rail::SenseVdd => self.cfg.fixed_rail_ma.sensevdd,
        }
    }

    /// Frequency of ring oscillator `idx` in MHz:
    /// `f_nom x scale[idx] x (Vcore/0.9V)^alpha x (1 - k_T (T - 25))`.
    ///
    /// # Panics
    /// If `idx >= 60`.
    pub fn ro_frequency(&self, idx: usize) -> Result<f64, ChipError> {
        assert!(idx < RO_COUNT, "RO index {idx} out of range 0..{RO_COUNT}");
        if !self.variant.has_sensors() {
            return Err(ChipError::SensorAbsent);
        }
        if !self.sense_powered() {
            return Err(ChipError::SensorUnpowered);
        }
        let v_ratio = self.rails_mv[Rail::CoreVdd.index()] / V_NOM_MV;
        let temp_term = 1.0 - self.cfg.k_t_per_c * (self.params.temp_c - 25.0);
        let f = self.cfg.ro_f_nom_mhz
            * self.params.ro_scale[idx]
            * v_ratio.powf(self.cfg.alpha)
            * temp_term;
        Ok(f.max(0.0))
    }

    /// Leakage current of one monitor device in nA:
    /// `base x exp(k_L (T - 25))`.
    pub fn leakage_current(&self, device: LeakDevice) -> Result<f64, ChipError> {
        if !self.variant.has_sensors() {
            return Err(ChipError::SensorAbsent);
        }
        if !self.sense_powered() {
            return Err(ChipError::SensorUnpowered);
        }
        let temp_term = (self.cfg.k_l_per_c * (self.params.temp_c - 25.0)).exp();
        Ok(self.params.leak_base(device) * temp_term)
    }
}
