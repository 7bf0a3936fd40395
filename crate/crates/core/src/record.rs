//! One characterization point as recorded by the master controller.

use serde::{Deserialize, Serialize};

use crate::chip::ChipVariant;
use crate::codecs::scan::PllConfig;

/// Saturation flags for every digitized quantity in a record. A saturated
/// reading is still reported but pegged at the chain's full scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaturationFlags {
    pub i_core_active: bool,
    pub i_core_sleep: bool,
    pub i_sram: bool,
    pub leak_rvtp: bool,
    pub leak_rvtn: bool,
    pub leak_hvtp: bool,
    pub leak_hvtn: bool,
    pub freq: bool,
}

impl SaturationFlags {
    pub fn any(&self) -> bool {
        self.i_core_active
            || self.i_core_sleep
            || self.i_sram
            || self.leak_rvtp
            || self.leak_rvtn
            || self.leak_hvtp
            || self.leak_hvtn
            || self.freq
    }
}

/// Leakage readings per monitor device, in nanoamps. Absent on Michigan
/// chips and on failed runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LeakReadings {
    pub rvtp_na: Option<f64>,
    pub rvtn_na: Option<f64>,
    pub hvtp_na: Option<f64>,
    pub hvtn_na: Option<f64>,
}

/// One measurement record: the configured point, everything the slave
/// measured through the sensing chains, and the run verdict. Fields are
/// `None` where a sensor is absent (Michigan) or a run failed before the
/// sample was taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub chip_id: u32,
    pub variant: ChipVariant,
    pub vcore_mv: u32,
    pub vsram_mv: u32,
    pub pll: PllConfig,
    /// Internal clock at this point; 20 x M / N MHz under PLL select.
    pub f_clk_mhz: f64,
    pub i_core_active_ma: Option<f64>,
    pub i_core_sleep_ma: Option<f64>,
    pub i_sram_ma: Option<f64>,
    pub leak_na: LeakReadings,
    pub fmax_est_mhz: Option<f64>,
    pub saturation: SaturationFlags,
    pub result_ok: bool,
    /// Set when the chip variant carries no on-chip sensors.
    pub sensors_absent: bool,
    /// The chip's own derived seed (the master seed lives in the manifest).
    pub seed: u64,
    /// Labelled sample timestamps, for window/ordering checks. Not exported
    /// to CSV.
    pub sample_t_ns: Vec<(String, u64)>,
}

impl MeasurementRecord {
    /// Empty record for a point whose run failed before any sampling.
    pub fn empty(
        chip_id: u32,
        variant: ChipVariant,
        vcore_mv: u32,
        vsram_mv: u32,
        pll: PllConfig,
        f_clk_mhz: f64,
        seed: u64,
    ) -> Self {
        Self {
            chip_id,
            variant,
            vcore_mv,
            vsram_mv,
            pll,
            f_clk_mhz,
            i_core_active_ma: None,
            i_core_sleep_ma: None,
            i_sram_ma: None,
            leak_na: LeakReadings::default(),
            fmax_est_mhz: None,
            saturation: SaturationFlags::default(),
            result_ok: false,
            sensors_absent: !variant.has_sensors(),
            seed,
            sample_t_ns: Vec::new(),
        }
    }
}
