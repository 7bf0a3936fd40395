//! Sweep orchestration: expands the configured grid over the chip
//! population, runs every point through the closed loop and merges the
//! results deterministically.

use rayon::prelude::*;
use serde::Serialize;

use crate::chip::{Chip, ChipVariant};
use crate::config::{ConfigError, SweepConfig};
use crate::controller::{
    master_run, MasterConfig, MeasurePlan, PointSettings, RunIds, RunRecord, TestProgram,
};
use crate::power::{Board, PowerSequence, Rail};
use crate::record::MeasurementRecord;
use crate::sensing::{FreqGateSpec, SenseChannelSpec};
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Serial,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: u32,
    pub settings: PointSettings,
}

/// Grid points in deterministic order: vcore outermost, then vsram, then
/// PLL settings.
pub fn grid_points(cfg: &SweepConfig) -> Vec<GridPoint> {
    let mut points = Vec::new();
    let mut index = 0;
    for &vcore_mv in &cfg.vcore_mv {
        for &vsram_mv in &cfg.vsram_mv {
            for &pll in &cfg.pll {
                points.push(GridPoint {
                    index,
                    settings: PointSettings {
                        vcore_mv,
                        vsram_mv,
                        pll,
                    },
                });
                index += 1;
            }
        }
    }
    points
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-chip seed derived from the master seed; chips are decorrelated
/// across both chip ids and master seeds.
pub fn chip_seed(master_seed: u64, chip_id: u32) -> u64 {
    splitmix64(master_seed ^ splitmix64(u64::from(chip_id).wrapping_add(1)))
}

pub struct SweepOutput {
    pub records: Vec<MeasurementRecord>,
    pub run_records: Vec<RunRecord>,
    pub trace_jsonl: String,
}

fn measure_plan(cfg: &SweepConfig) -> MeasurePlan {
    MeasurePlan {
        ro_indices: cfg.ro_indices.clone(),
        gate: FreqGateSpec {
            gate_ms: cfg.gate_ms,
        },
        core_channel: SenseChannelSpec::core(cfg.sense_offset_uv),
        sram_channel: SenseChannelSpec::sram(cfg.sense_offset_uv),
        leak_chain: Default::default(),
        sleep_sample_delay_ns: 1_000_000,
        kappa: cfg.kappa,
    }
}

fn master_config(cfg: &SweepConfig, fault_skip_step: Option<u8>) -> MasterConfig {
    MasterConfig {
        poll_period_ns: cfg.poll_period_ns,
        timeout_ns: cfg.timeout_ns,
        fault_skip_step,
        behavior_override: None,
    }
}

/// One full closed-loop run on a fresh chip and board.
pub fn run_point(
    cfg: &SweepConfig,
    program: &TestProgram,
    chip_id: u32,
    point: &GridPoint,
    fault_skip_step: Option<u8>,
    with_trace: bool,
) -> Result<(RunRecord, Trace), ConfigError> {
    let seed = chip_seed(cfg.seed, chip_id);
    let mut chip = Chip::new(cfg.variant, seed, cfg.model.clone())
        .map_err(|e| ConfigError::Validation(e.to_string()))?;
    let mut board = Board {
        bounds: cfg.sweep_bounds,
        ..Board::default()
    };
    let mut trace = if with_trace {
        Trace::enabled()
    } else {
        Trace::disabled()
    };
    let plan = measure_plan(cfg);
    let master_cfg = master_config(cfg, fault_skip_step);
    let record = master_run(
        &mut chip,
        &mut board,
        &PowerSequence::default_up(),
        program,
        &point.settings,
        &plan,
        &master_cfg,
        RunIds {
            chip_id,
            grid_index: point.index,
        },
        &mut trace,
    )
    .map_err(|e| ConfigError::Validation(e.to_string()))?;
    Ok((record, trace))
}

/// Runs the whole grid over the whole population. Records come back in
/// (chip_id, grid index) order regardless of execution mode, and parallel
/// execution is byte-identical to serial.
pub fn run_sweep(
    cfg: &SweepConfig,
    program: &TestProgram,
    mode: ExecMode,
    with_trace: bool,
) -> Result<SweepOutput, ConfigError> {
    cfg.validate()?;
    let points = grid_points(cfg);
    let jobs: Vec<(u32, GridPoint)> = (0..cfg.n_chips)
        .flat_map(|chip_id| points.iter().map(move |p| (chip_id, *p)))
        .collect();

    let results: Vec<(RunRecord, Trace)> = match mode {
        ExecMode::Serial => jobs
            .iter()
            .map(|(chip_id, point)| run_point(cfg, program, *chip_id, point, None, with_trace))
            .collect::<Result<_, _>>()?,
        ExecMode::Parallel => jobs
            .par_iter()
            .map(|(chip_id, point)| run_point(cfg, program, *chip_id, point, None, with_trace))
            .collect::<Result<_, _>>()?,
    };

    let mut records = Vec::with_capacity(results.len());
    let mut run_records = Vec::with_capacity(results.len());
    let mut trace_jsonl = String::new();
    for (run, trace) in results {
        trace_jsonl.push_str(&trace.to_jsonl());
        records.push(run.measurement.clone());
        run_records.push(run);
    }
    Ok(SweepOutput {
        records,
        run_records,
        trace_jsonl,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    config: &'a SweepConfig,
    rail_dac_channels: Vec<(String, u8)>,
    n_records: usize,
}

/// Reproducibility manifest written next to the records: config echo, code
/// version and the rail-to-DAC-channel map.
pub fn manifest_json(cfg: &SweepConfig, n_records: usize) -> String {
    let board = Board::default();
    let manifest = Manifest {
        tool: "varichar",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        rail_dac_channels: Rail::ALL
            .iter()
            .map(|&rail| (rail.to_string(), board.spec(rail).dac_channel))
            .collect(),
        n_records,
    };
    let mut out = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    out.push('\n');
    out
}

/// The default single-point run used by the `single` subcommand: chip 0,
/// first grid point.
pub fn run_single(
    cfg: &SweepConfig,
    program: &TestProgram,
    fault_skip_step: Option<u8>,
) -> Result<(RunRecord, Trace), ConfigError> {
    cfg.validate()?;
    let point = grid_points(cfg)
        .into_iter()
        .next()
        .expect("validated non-empty grid");
    run_point(cfg, program, 0, &point, fault_skip_step, true)
}

/// Variant re-export used when replaying traces.
pub fn variant_of(cfg: &SweepConfig) -> ChipVariant {
    cfg.variant
}
