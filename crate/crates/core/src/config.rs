//! Run configuration: parsing, defaults and validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chip::{ChipVariant, ModelConfig, RO_COUNT};
use crate::codecs::hex::parse_hex_image;
use crate::codecs::scan::{ClkSel, PllConfig};
use crate::controller::{builtin_program, TestProgram};
use crate::power::SweepBounds;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("program file {path}: {message}")]
    Program { path: String, message: String },
}

/// Where the test program comes from: the built-in marker program or an
/// Intel-HEX file plus its behavioral description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProgramSource {
    Builtin {
        builtin: String,
    },
    Hex {
        hex_path: String,
        base_addr: u32,
        latency_ns: u64,
        result_addr: u32,
        expected_words: Vec<u32>,
    },
}

impl Default for ProgramSource {
    fn default() -> Self {
        ProgramSource::Builtin {
            builtin: "default".into(),
        }
    }
}

/// The grid driving a characterization run: chip population x core/SRAM
/// voltages x PLL settings, plus model overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub variant: ChipVariant,
    pub n_chips: u32,
    pub seed: u64,
    pub vcore_mv: Vec<u32>,
    pub vsram_mv: Vec<u32>,
    pub pll: Vec<PllConfig>,
    pub ro_indices: Vec<u8>,
    pub gate_ms: f64,
    pub program: ProgramSource,
    pub model: ModelConfig,
    pub sweep_bounds: SweepBounds,
    pub poll_period_ns: u64,
    pub timeout_ns: u64,
    /// Amplifier input offset applied to both current channels, in uV.
    pub sense_offset_uv: f64,
    /// fmax estimate = kappa x slowest measured RO.
    pub kappa: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            variant: ChipVariant::Ucla,
            n_chips: 1,
            seed: 0,
            vcore_mv: vec![900],
            vsram_mv: vec![900],
            pll: vec![PllConfig::new(5, 1, ClkSel::Pll)],
            ro_indices: (0..8).collect(),
            gate_ms: 1.0,
            program: ProgramSource::default(),
            model: ModelConfig::default(),
            sweep_bounds: SweepBounds::default(),
            poll_period_ns: 100_000,
            timeout_ns: 100_000_000,
            sense_offset_uv: 0.0,
            kappa: 1.0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_chips == 0 {
            return Err(ConfigError::Validation("n_chips must be >= 1".into()));
        }
        for (name, list_len) in [
            ("vcore_mv", self.vcore_mv.len()),
            ("vsram_mv", self.vsram_mv.len()),
            ("pll", self.pll.len()),
        ] {
            if list_len == 0 {
                return Err(ConfigError::Validation(format!("{name} must be non-empty")));
            }
        }
        for (name, list) in [("vcore_mv", &self.vcore_mv), ("vsram_mv", &self.vsram_mv)] {
            for &mv in list {
                if !self.sweep_bounds.contains(f64::from(mv)) {
                    return Err(ConfigError::Validation(format!(
                        "{name} value {mv} outside sweep bounds {}..={} mV",
                        self.sweep_bounds.min_mv, self.sweep_bounds.max_mv
                    )));
                }
            }
        }
        for pll in &self.pll {
            if pll.clk_sel == ClkSel::Pll && (pll.mult_m == 0 || pll.div_n == 0) {
                return Err(ConfigError::Validation(format!(
                    "pll m={} n={}: both must be in 1..=255 under PLL select",
                    pll.mult_m, pll.div_n
                )));
            }
        }
        for &idx in &self.ro_indices {
            if usize::from(idx) >= RO_COUNT {
                return Err(ConfigError::Validation(format!(
                    "ro index {idx} out of range 0..{RO_COUNT}"
                )));
            }
        }
        if !(self.gate_ms > 0.0) {
            return Err(ConfigError::Validation("gate_ms must be > 0".into()));
        }
        if self.poll_period_ns == 0 || self.timeout_ns == 0 {
            return Err(ConfigError::Validation(
                "poll_period_ns and timeout_ns must be > 0".into(),
            ));
        }
        if !(self.kappa > 0.0) {
            return Err(ConfigError::Validation("kappa must be > 0".into()));
        }
        self.model
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        Ok(())
    }

    /// Materializes the configured program. Relative HEX paths resolve
    /// against `base_dir`.
    pub fn resolve_program(&self, base_dir: &Path) -> Result<TestProgram, ConfigError> {
        match &self.program {
            ProgramSource::Builtin { builtin } => {
                if builtin != "default" {
                    return Err(ConfigError::Validation(format!(
                        "unknown builtin program {builtin:?}"
                    )));
                }
                Ok(builtin_program(self.model.sram_base))
            }
            ProgramSource::Hex {
                hex_path,
                base_addr,
                latency_ns,
                result_addr,
                expected_words,
            } => {
                let path = base_dir.join(hex_path);
                let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::Program {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                let image = parse_hex_image(&text).map_err(|e| ConfigError::Program {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                let program = TestProgram {
                    image,
                    base_addr: *base_addr,
                    latency_ns: *latency_ns,
                    result_addr: *result_addr,
                    expected_words: expected_words.clone(),
                };
                program
                    .validate(self.model.sram_base, self.model.sram_bytes())
                    .map_err(|e| ConfigError::Validation(e.to_string()))?;
                Ok(program)
            }
        }
    }
}

/// Parses a JSON configuration, applying defaults for omitted fields.
/// Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<SweepConfig, ConfigError> {
    let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| {
        ConfigError::Parse(format!("{e} (line {}, column {})", e.line(), e.column()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}
