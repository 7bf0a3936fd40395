//! The board's power path: eight supply rails referenced from an 8-channel
//! 12-bit DAC through unity-gain analog buffers, power-up/down sequencing,
//! and software-adjustable COREVDD/SRAMVDD for voltage sweeps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chip::Chip;
use crate::codecs::i2c::{
    dac_frame_at, parse_dac_frame, DacFrameError, I2cFrame, DEFAULT_DAC_ADDR7,
};

pub const DAC_FULL_SCALE: u16 = 4095;
/// Each buffer channel can source up to 30 mA.
pub const BUFFER_LIMIT_MA: f64 = 30.0;
pub const DEFAULT_VREF_MV: f64 = 3300.0;
pub const DEFAULT_DWELL_NS: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("{mv} mV outside the DAC range 0..={vref_mv} mV")]
    OutOfRange { mv: f64, vref_mv: f64 },
    #[error("buffer over-current: load {i_load_ma:.3} mA exceeds {BUFFER_LIMIT_MA} mA")]
    OverCurrent { i_load_ma: f64 },
    #[error("rail {0} appears more than once in the sequence")]
    DuplicateRail(Rail),
    #[error("rail {0} is not software-adjustable")]
    NotAdjustable(Rail),
    #[error("{mv} mV outside the sweep bounds {min_mv}..={max_mv} mV")]
    OutOfSweepRange { mv: f64, min_mv: f64, max_mv: f64 },
    #[error("frame addressed to {0:#04x}, not the DAC")]
    WrongAddress(u8),
    #[error(transparent)]
    Frame(#[from] DacFrameError),
}

/// One of the eight supply domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Rail {
    Dvdd,
    Dvdd2,
    Avdd,
    Avdd2,
    CoreVdd,
    SramVdd,
    WrapperVdd,
    SenseVdd,
}

impl Rail {
    pub const ALL: [Rail; 8] = [
        Rail::Dvdd,
        Rail::Dvdd2,
        Rail::Avdd,
        Rail::Avdd2,
        Rail::CoreVdd,
        Rail::SramVdd,
        Rail::WrapperVdd,
        Rail::SenseVdd,
    ];

    pub fn index(self) -> usize {
        Rail::ALL.iter().position(|&r| r == self).expect("member")
    }
}

impl std::fmt::Display for Rail {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Rail::Dvdd => "DVDD",
            Rail::Dvdd2 => "DVDD2",
            Rail::Avdd => "AVDD",
            Rail::Avdd2 => "AVDD2",
            Rail::CoreVdd => "COREVDD",
            Rail::SramVdd => "SRAMVDD",
            Rail::WrapperVdd => "WRAPPERVDD",
            Rail::SenseVdd => "SENSEVDD",
        };
        write!(f, "{name}")
    }
}

/// Electrical constants of one rail. Only COREVDD and SRAMVDD are
/// software-adjustable; the DAC channel map is a fixed bijection recorded
/// in run manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RailSpec {
    pub rail: Rail,
    pub nominal_mv: f64,
    pub adjustable: bool,
    pub dac_channel: u8,
}

/// The eight rails in channel order. WRAPPERVDD and SENSEVDD nominals are
/// not published for the chip; 1.0 V defaults are used.
pub fn default_rails() -> [RailSpec; 8] {
    let nominal = |rail| match rail {
        Rail::Dvdd => 3300.0,
        Rail::Dvdd2 => 1800.0,
        Rail::Avdd => 1000.0,
        Rail::Avdd2 => 500.0,
        Rail::CoreVdd => 900.0,
        Rail::SramVdd => 900.0,
        Rail::WrapperVdd => 1000.0,
        Rail::SenseVdd => 1000.0,
    };
    Rail::ALL.map(|rail| RailSpec {
        rail,
        nominal_mv: nominal(rail),
        adjustable: matches!(rail, Rail::CoreVdd | Rail::SramVdd),
        dac_channel: rail.index() as u8,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceStep {
    pub rail: Rail,
    pub target_mv: f64,
    pub dwell_ns: u64,
}

/// Ordered rail bring-up plan. Power-down replays the same rails in
/// reverse order. No rail may appear twice.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSequence {
    steps: Vec<SequenceStep>,
}

impl PowerSequence {
    pub fn new(steps: Vec<SequenceStep>) -> Result<Self, PowerError> {
        for (i, step) in steps.iter().enumerate() {
            if steps[..i].iter().any(|s| s.rail == step.rail) {
                return Err(PowerError::DuplicateRail(step.rail));
            }
        }
        Ok(Self { steps })
    }

    /// DVDD first, peripheral rails next, SRAM/core rails last, 1 ms dwell.
    pub fn default_up() -> Self {
        let rails = default_rails();
        let order = [
            Rail::Dvdd,
            Rail::Dvdd2,
            Rail::Avdd,
            Rail::Avdd2,
            Rail::WrapperVdd,
            Rail::SenseVdd,
            Rail::SramVdd,
            Rail::CoreVdd,
        ];
        let steps = order
            .iter()
            .map(|&rail| SequenceStep {
                rail,
                target_mv: rails[rail.index()].nominal_mv,
                dwell_ns: DEFAULT_DWELL_NS,
            })
            .collect();
        Self { steps }
    }

    pub fn steps(&self) -> &[SequenceStep] {
        &self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct DacChannel {
    valid: bool,
    code: u16,
}

/// Register state of the 8-channel DAC. A channel outputs 0 mV until the
/// first valid code is written to it.
#[derive(Debug, Clone, PartialEq)]
pub struct DacState {
    channels: [DacChannel; 8],
    pub vref_mv: f64,
}

impl Default for DacState {
    fn default() -> Self {
        Self::new(DEFAULT_VREF_MV)
    }
}

impl DacState {
    pub fn new(vref_mv: f64) -> Self {
        Self {
            channels: [DacChannel::default(); 8],
            vref_mv,
        }
    }

    pub fn write(&mut self, channel: u8, code: u16) {
        assert!(channel < 8 && code <= DAC_FULL_SCALE);
        self.channels[channel as usize] = DacChannel { valid: true, code };
    }

    pub fn output_mv(&self, channel: u8) -> f64 {
        let ch = self.channels[channel as usize];
        if ch.valid {
            dac_volts(ch.code, self.vref_mv)
        } else {
            0.0
        }
    }

    pub fn code(&self, channel: u8) -> Option<u16> {
        let ch = self.channels[channel as usize];
        ch.valid.then_some(ch.code)
    }
}

/// Code whose output is closest to `mv`: round(mv/vref x 4095).
pub fn dac_code_for(mv: f64, vref_mv: f64) -> Result<u16, PowerError> {
    if !(0.0..=vref_mv).contains(&mv) {
        return Err(PowerError::OutOfRange { mv, vref_mv });
    }
    Ok((mv / vref_mv * f64::from(DAC_FULL_SCALE)).round() as u16)
}

/// Output voltage of a code; strictly increasing in the code.
pub fn dac_volts(code: u16, vref_mv: f64) -> f64 {
    assert!(code <= DAC_FULL_SCALE, "DAC code {code} out of range");
    f64::from(code) / f64::from(DAC_FULL_SCALE) * vref_mv
}

/// Unity-gain buffer between DAC and rail: passes the voltage through while
/// the load stays within the channel's 30 mA rating.
pub fn buffer_out(vin_mv: f64, i_load_ma: f64) -> Result<f64, PowerError> {
    if i_load_ma > BUFFER_LIMIT_MA {
        return Err(PowerError::OverCurrent { i_load_ma });
    }
    Ok(vin_mv)
}

/// Plans the power-up frame train: one DAC frame per step in sequence
/// order, timestamps spaced by each step's dwell, starting at t = 0.
/// Channel codes are latched into `dac` as planned.
pub fn power_up(
    seq: &PowerSequence,
    dac: &mut DacState,
    rails: &[RailSpec; 8],
    dac_addr7: u8,
) -> Result<Vec<(u64, I2cFrame)>, PowerError> {
    let mut frames = Vec::with_capacity(seq.steps().len());
    let mut t_ns = 0u64;
    for step in seq.steps() {
        let channel = rails[step.rail.index()].dac_channel;
        let code = dac_code_for(step.target_mv, dac.vref_mv)?;
        dac.write(channel, code);
        frames.push((t_ns, dac_frame_at(dac_addr7, channel, code)));
        t_ns += step.dwell_ns;
    }
    Ok(frames)
}

/// Plans the power-down frame train: every rail driven to code 0 in the
/// reverse rail order of `seq`.
pub fn power_down(
    seq: &PowerSequence,
    dac: &mut DacState,
    rails: &[RailSpec; 8],
    dac_addr7: u8,
) -> Vec<(u64, I2cFrame)> {
    let mut frames = Vec::with_capacity(seq.steps().len());
    let mut t_ns = 0u64;
    for step in seq.steps().iter().rev() {
        let channel = rails[step.rail.index()].dac_channel;
        dac.write(channel, 0);
        frames.push((t_ns, dac_frame_at(dac_addr7, channel, 0)));
        t_ns += step.dwell_ns;
    }
    frames
}

/// Allowed range for swept rail voltages, in millivolts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBounds {
    pub min_mv: f64,
    pub max_mv: f64,
}

impl Default for SweepBounds {
    fn default() -> Self {
        Self {
            min_mv: 550.0,
            max_mv: 1100.0,
        }
    }
}

impl SweepBounds {
    pub fn contains(&self, mv: f64) -> bool {
        (self.min_mv..=self.max_mv).contains(&mv)
    }
}

/// Single frame retargeting an adjustable rail's channel for a sweep point.
pub fn set_rail_voltage(
    spec: &RailSpec,
    mv: f64,
    bounds: &SweepBounds,
    vref_mv: f64,
    dac_addr7: u8,
) -> Result<I2cFrame, PowerError> {
    if !spec.adjustable {
        return Err(PowerError::NotAdjustable(spec.rail));
    }
    if !bounds.contains(mv) {
        return Err(PowerError::OutOfSweepRange {
            mv,
            min_mv: bounds.min_mv,
            max_mv: bounds.max_mv,
        });
    }
    let code = dac_code_for(mv, vref_mv)?;
    Ok(dac_frame_at(dac_addr7, spec.dac_channel, code))
}

/// Power path between the I2C bus and the chip's rails: the DAC, the
/// buffers, and the rail/channel map.
#[derive(Debug, Clone, PartialEq)]
pub struct Board {
    pub rails: [RailSpec; 8],
    pub dac: DacState,
    pub dac_addr7: u8,
    pub bounds: SweepBounds,
}

impl Default for Board {
    fn default() -> Self {
        Self {
            rails: default_rails(),
            dac: DacState::default(),
            dac_addr7: DEFAULT_DAC_ADDR7,
            bounds: SweepBounds::default(),
        }
    }
}

impl Board {
    pub fn rail_for_channel(&self, channel: u8) -> Option<Rail> {
        self.rails
            .iter()
            .find(|spec| spec.dac_channel == channel)
            .map(|spec| spec.rail)
    }

    pub fn spec(&self, rail: Rail) -> &RailSpec {
        &self.rails[rail.index()]
    }

    /// Decodes one DAC frame, updates the DAC register, drives the rail
    /// through its buffer and checks the buffer current at the new voltage.
    pub fn apply_frame(&mut self, chip: &mut Chip, frame: &I2cFrame) -> Result<(), PowerError> {
        if frame.addr7 != self.dac_addr7 {
            return Err(PowerError::WrongAddress(frame.addr7));
        }
        let (channel, code) = parse_dac_frame(frame)?;
        self.dac.write(channel, code);
        let rail = self
            .rail_for_channel(channel)
            .expect("channel map is a bijection over 8 rails");
        let v_mv = self.dac.output_mv(channel);
        chip.apply_rail(rail, v_mv);
        let i_load = chip.current_draw(rail);
        buffer_out(v_mv, i_load)?;
        Ok(())
    }

    /// Applies a planned frame train, advancing chip time to each frame's
    /// offset relative to `t0_ns`.
    pub fn apply_plan(
        &mut self,
        chip: &mut Chip,
        plan: &[(u64, I2cFrame)],
        t0_ns: u64,
    ) -> Result<(), PowerError> {
        for (t_rel, frame) in plan {
            let due = t0_ns + t_rel;
            if due > chip.sim_time_ns {
                chip.step(due - chip.sim_time_ns);
            }
            self.apply_frame(chip, frame)?;
        }
        Ok(())
    }
}
