//! Forward and inverse models of the three measurement chains.
//!
//! Core and SRAM currents develop a voltage across a sense resistor
//! (1/3 ohm from three 1 ohm precision resistors in parallel for the core,
//! 7.5 ohm for SRAM), get amplified by G = 1 + 100k/R_G (both channels run
//! at G = 200) and land on the slave controller's 10-bit ADC. Leakage
//! currents are far too small for that path; an integrator converts them to
//! a voltage ramp V = I t / C first. Ring-oscillator frequency is counted
//! over a gate window into a 16-bit saturating counter read out as two
//! multiplexed bytes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chip::{Chip, ChipError};

/// Feedback resistance of the instrumentation amplifier's gain equation.
pub const GAIN_NUMERATOR_OHM: f64 = 100_000.0;
/// Gain both current channels are set to.
pub const CHANNEL_GAIN: f64 = 200.0;
/// Three 1 ohm precision resistors in parallel.
pub const CORE_R_SENSE_OHM: f64 = 1.0 / 3.0;
pub const SRAM_R_SENSE_OHM: f64 = 7.5;
/// Worst-case input offset of the amplifier.
pub const WORST_CASE_OFFSET_UV: f64 = 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensingError {
    #[error("gain resistor must be positive, got {0} ohm")]
    NonPositiveResistance(f64),
}

/// The slave controller's ADC: 10 bits over a 3.3 V reference by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdcSpec {
    pub bits: u32,
    pub vref_mv: f64,
}

impl Default for AdcSpec {
    fn default() -> Self {
        Self {
            bits: 10,
            vref_mv: 3300.0,
        }
    }
}

impl AdcSpec {
    pub fn max_code(&self) -> u16 {
        ((1u32 << self.bits) - 1) as u16
    }

    pub fn lsb_mv(&self) -> f64 {
        self.vref_mv / f64::from(1u32 << self.bits)
    }
}

/// Amplifier gain G = 1 + 100k / R_G. An open circuit (infinite R_G)
/// degenerates to unity gain.
pub fn amplifier_gain(r_g_ohm: f64) -> Result<f64, SensingError> {
    if r_g_ohm.is_infinite() && r_g_ohm > 0.0 {
        return Ok(1.0);
    }
    if !(r_g_ohm > 0.0) {
        return Err(SensingError::NonPositiveResistance(r_g_ohm));
    }
    Ok(1.0 + GAIN_NUMERATOR_OHM / r_g_ohm)
}

/// Gain resistor realizing a target gain.
pub fn gain_resistor_for(gain: f64) -> f64 {
    GAIN_NUMERATOR_OHM / (gain - 1.0)
}

/// One sense-resistor current channel: resistor, amplifier, ADC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SenseChannelSpec {
    pub r_sense_ohm: f64,
    pub r_g_ohm: f64,
    /// Amplifier input offset; 0 models the ideal calibrated chain, 25 uV
    /// the amplifier's worst-case spec.
    pub offset_uv: f64,
    pub adc: AdcSpec,
}

impl SenseChannelSpec {
    pub fn core(offset_uv: f64) -> Self {
        Self {
            r_sense_ohm: CORE_R_SENSE_OHM,
            r_g_ohm: gain_resistor_for(CHANNEL_GAIN),
            offset_uv,
            adc: AdcSpec::default(),
        }
    }

    pub fn sram(offset_uv: f64) -> Self {
        Self {
            r_sense_ohm: SRAM_R_SENSE_OHM,
            r_g_ohm: gain_resistor_for(CHANNEL_GAIN),
            offset_uv,
            adc: AdcSpec::default(),
        }
    }

    pub fn gain(&self) -> f64 {
        amplifier_gain(self.r_g_ohm).expect("positive gain resistor")
    }

    /// Sense-resistor voltage drop for a rail current, before amplification.
    pub fn drop_mv(&self, i_ma: f64) -> f64 {
        i_ma * self.r_sense_ohm
    }

    /// Smallest current step one ADC code represents, referred to input.
    pub fn input_lsb_ma(&self) -> f64 {
        self.adc.lsb_mv() / self.gain() / self.r_sense_ohm
    }

    /// Largest current representable before the ADC saturates.
    pub fn full_scale_ma(&self) -> f64 {
        self.adc.vref_mv / self.gain() / self.r_sense_ohm
    }
}

/// Integrator chain for one leakage device: V = I t / C, then the ADC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeakageChainSpec {
    pub c_int_nf: f64,
    pub t_int_ms: f64,
    pub adc: AdcSpec,
}

impl Default for LeakageChainSpec {
    fn default() -> Self {
        Self {
            c_int_nf: 1.0,
            t_int_ms: 10.0,
            adc: AdcSpec::default(),
        }
    }
}

impl LeakageChainSpec {
    /// Current that ramps the integrator exactly to the ADC reference.
    pub fn full_scale_na(&self) -> f64 {
        self.c_int_nf * self.adc.vref_mv / self.t_int_ms
    }

    /// Smallest leakage step one ADC code represents.
    pub fn input_lsb_na(&self) -> f64 {
        self.c_int_nf * self.adc.lsb_mv() / self.t_int_ms
    }

    pub fn t_int_ns(&self) -> u64 {
        (self.t_int_ms * 1e6) as u64
    }
}

/// Frequency-counter gate window. The counter is 16-bit saturating, so the
/// highest measurable frequency is 65535 counts per gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreqGateSpec {
    pub gate_ms: f64,
}

impl Default for FreqGateSpec {
    fn default() -> Self {
        Self { gate_ms: 1.0 }
    }
}

impl FreqGateSpec {
    pub fn max_mhz(&self) -> f64 {
        65535.0 / (self.gate_ms * 1000.0)
    }

    pub fn gate_ns(&self) -> u64 {
        (self.gate_ms * 1e6) as u64
    }
}

/// A value recovered from a digital code, with its saturation flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub value: f64,
    pub saturated: bool,
}

/// Floor quantization of a voltage, saturating at the code extremes.
pub fn adc_sample(v_mv: f64, spec: &AdcSpec) -> u16 {
    if v_mv <= 0.0 {
        return 0;
    }
    let max = spec.max_code();
    if v_mv >= spec.vref_mv {
        return max;
    }
    let code = (v_mv / spec.vref_mv * f64::from(1u32 << spec.bits)).floor() as u32;
    code.min(u32::from(max)) as u16
}

/// Digitizes a rail current through the sense resistor and amplifier.
pub fn current_to_adc(i_ma: f64, spec: &SenseChannelSpec) -> u16 {
    let v_mv = (spec.drop_mv(i_ma) + spec.offset_uv / 1000.0) * spec.gain();
    adc_sample(v_mv, &spec.adc)
}

/// Inverse of the current chain: code -> milliamps.
pub fn current_from_code(code: u16, spec: &SenseChannelSpec) -> Measurement {
    let v_mv = f64::from(code) * spec.adc.lsb_mv();
    Measurement {
        value: v_mv / spec.gain() / spec.r_sense_ohm,
        saturated: code == spec.adc.max_code(),
    }
}

/// Cycles counted over the gate window for a given frequency, saturating
/// at the counter's 16-bit ceiling.
pub fn count_for(f_mhz: f64, gate: &FreqGateSpec) -> u16 {
    let count = (f_mhz * gate.gate_ms * 1000.0).floor();
    count.clamp(0.0, 65535.0) as u16
}

/// Runs one ring-oscillator count: SELECT, ENABLE, COUNT pulse, gate wait,
/// READ, modeled as a single transaction. Saturates at 65535.
pub fn measure_frequency(
    chip: &Chip,
    ro_idx: usize,
    gate: &FreqGateSpec,
) -> Result<u16, ChipError> {
    Ok(count_for(chip.ro_frequency(ro_idx)?, gate))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputSelect {
    High,
    Low,
}

/// The counter's 8 output pins multiplexed by the output-select pin.
pub fn read_count_byte(count: u16, os: OutputSelect) -> u8 {
    match os {
        OutputSelect::High => (count >> 8) as u8,
        OutputSelect::Low => (count & 0xFF) as u8,
    }
}

/// Inverse of the counting: count -> MHz.
pub fn freq_from_count(count: u16, gate: &FreqGateSpec) -> Measurement {
    Measurement {
        value: f64::from(count) / (gate.gate_ms * 1000.0),
        saturated: count == u16::MAX,
    }
}

/// Maximum-clock estimate over a set of recovered RO frequencies:
/// kappa x the slowest oscillator.
pub fn fmax_estimate(freqs_mhz: &[f64], kappa: f64) -> Option<f64> {
    freqs_mhz
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, f| {
            Some(acc.map_or(f, |m| m.min(f)))
        })
        .map(|min| kappa * min)
}

/// Integrator output after the integration window, clamped at the ADC
/// reference. Units work out to i_na x t_ms / c_nf = millivolts.
pub fn integrate_leakage(i_na: f64, chain: &LeakageChainSpec) -> f64 {
    let v_mv = i_na * chain.t_int_ms / chain.c_int_nf;
    v_mv.min(chain.adc.vref_mv)
}

/// Digitizes a leakage current through the integrator chain.
pub fn leakage_to_adc(i_na: f64, chain: &LeakageChainSpec) -> u16 {
    adc_sample(integrate_leakage(i_na, chain), &chain.adc)
}

/// Inverse of the leakage chain: code -> nanoamps.
pub fn leakage_from_code(code: u16, chain: &LeakageChainSpec) -> Measurement {
    let v_mv = f64::from(code) * chain.adc.lsb_mv();
    Measurement {
        value: chain.c_int_nf * v_mv / chain.t_int_ms,
        saturated: code == chain.adc.max_code(),
    }
}

/// P = V x I, exactly.
pub fn power_estimate(v_mv: f64, i_ma: f64) -> f64 {
    v_mv * i_ma / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_examples() {
        assert_eq!(amplifier_gain(100_000.0).unwrap(), 2.0);
        assert!((amplifier_gain(502.513).unwrap() - 200.0).abs() < 0.01);
        assert_eq!(amplifier_gain(f64::INFINITY).unwrap(), 1.0);
        assert!(matches!(
            amplifier_gain(0.0),
            Err(SensingError::NonPositiveResistance(_))
        ));
        assert!(matches!(
            amplifier_gain(-5.0),
            Err(SensingError::NonPositiveResistance(_))
        ));
    }

    #[test]
    fn channel_gain_is_200() {
        let core = SenseChannelSpec::core(0.0);
        assert!((core.gain() - 200.0).abs() < 1e-9);
    }

    #[test]
    fn adc_sample_examples() {
        let adc = AdcSpec::default();
        assert_eq!(adc_sample(0.0, &adc), 0);
        assert_eq!(adc_sample(1000.0, &adc), 310);
        assert_eq!(adc_sample(3400.0, &adc), 1023);
        assert_eq!(adc_sample(-1.0, &adc), 0);
        assert_eq!(adc_sample(3300.0, &adc), 1023);
    }

    #[test]
    fn core_channel_design_point() {
        let core = SenseChannelSpec::core(0.0);
        // 15 mA across 1/3 ohm: the 5 mV active-mode drop.
        assert!((core.drop_mv(15.0) - 5.0).abs() < 1e-12);
        assert_eq!(current_to_adc(15.0, &core), 310);
        // 1 mA: the 0.333 mV sleep-mode drop.
        assert!((core.drop_mv(1.0) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sram_channel_design_point() {
        let sram = SenseChannelSpec::sram(0.0);
        // 1 mA x 7.5 ohm x 200 = 1.5 V.
        assert_eq!(current_to_adc(1.0, &sram), 465);
    }

    #[test]
    fn current_recovery() {
        let core = SenseChannelSpec::core(0.0);
        let m = current_from_code(310, &core);
        assert!((m.value - 14.985).abs() < 0.001);
        assert!(!m.saturated);

        let zero = current_from_code(0, &core);
        assert_eq!(zero.value, 0.0);

        let full = current_from_code(1023, &core);
        assert!((full.value - 49.45).abs() < 0.01);
        assert!(full.saturated);
        assert!((core.full_scale_ma() - 49.5).abs() < 0.01);
    }

    #[test]
    fn count_byte_mux() {
        assert_eq!(read_count_byte(0xC350, OutputSelect::High), 0xC3);
        assert_eq!(read_count_byte(0xC350, OutputSelect::Low), 0x50);
    }

    #[test]
    fn freq_recovery() {
        let gate = FreqGateSpec::default();
        let m = freq_from_count(50_000, &gate);
        assert_eq!(m.value, 50.0);
        assert!(!m.saturated);
        assert_eq!(freq_from_count(0, &gate).value, 0.0);
        let sat = freq_from_count(65535, &gate);
        assert!((sat.value - 65.535).abs() < 1e-12);
        assert!(sat.saturated);
        assert!((gate.max_mhz() - 65.535).abs() < 1e-12);
    }

    #[test]
    fn fmax_is_kappa_times_min() {
        assert_eq!(fmax_estimate(&[50.0, 48.0, 52.0], 1.0), Some(48.0));
        assert_eq!(fmax_estimate(&[50.0], 0.9), Some(45.0));
        assert_eq!(fmax_estimate(&[], 1.0), None);
    }

    #[test]
    fn integrator_examples() {
        let chain = LeakageChainSpec::default();
        assert_eq!(integrate_leakage(50.0, &chain), 500.0);
        assert_eq!(integrate_leakage(0.0, &chain), 0.0);
        // 400 nA exceeds the 330 nA full scale: clamped to vref.
        assert_eq!(integrate_leakage(400.0, &chain), 3300.0);
        assert_eq!(chain.full_scale_na(), 330.0);
    }

    #[test]
    fn leakage_recovery() {
        let chain = LeakageChainSpec::default();
        let m = leakage_from_code(155, &chain);
        assert!((m.value - 49.95).abs() < 0.01);
        assert_eq!(leakage_from_code(0, &chain).value, 0.0);
        let sat = leakage_from_code(1023, &chain);
        assert!((sat.value - 329.7).abs() < 0.05);
        assert!(sat.saturated);
    }

    #[test]
    fn power_estimate_examples() {
        assert_eq!(power_estimate(3300.0, 15.0), 49.5);
        assert_eq!(power_estimate(900.0, 0.0), 0.0);
        assert_eq!(power_estimate(900.0, 15.0), 13.5);
    }

    #[test]
    fn worst_case_offset_bias() {
        let ideal = SenseChannelSpec::core(0.0);
        let worst = SenseChannelSpec::core(WORST_CASE_OFFSET_UV);
        let i = 10.0;
        let bias = current_from_code(current_to_adc(i, &worst), &ideal).value
            - current_from_code(current_to_adc(i, &ideal), &ideal).value;
        // 25 uV over 1/3 ohm is at most 0.075 mA of input-referred bias.
        assert!(bias.abs() <= 0.075 + ideal.input_lsb_ma());
    }
}
