//! Replays a recorded run trace against a fresh chip.
//!
//! Every wire payload in the trace is re-applied at its recorded
//! timestamp; every read-back and sensor code is recomputed and compared
//! against what the original run logged. A clean replay demonstrates the
//! whole loop is a deterministic function of (config, seed, wire traffic).

use thiserror::Error;

use crate::chip::{Chip, ChipVariant, LeakDevice, ModelConfig, ProgramBehavior};
use crate::codecs::bits::BitVector;
use crate::codecs::i2c::I2cFrame;
use crate::codecs::DapTransaction;
use crate::controller::MeasurePlan;
use crate::power::{Board, Rail};
use crate::sensing::{current_to_adc, leakage_to_adc, measure_frequency};
use crate::trace::{hex_word, TraceEvent, TraceKind};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("trace parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad trace field: {0}")]
    BadField(String),
    #[error("model error: {0}")]
    Model(String),
}

#[derive(Debug, Default)]
pub struct ReplayReport {
    pub events_applied: usize,
    pub mismatches: Vec<String>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn parse_hex_u32(s: &str) -> Result<u32, ReplayError> {
    let digits = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .unwrap_or(s);
    u32::from_str_radix(digits, 16).map_err(|e| ReplayError::BadField(format!("{s:?}: {e}")))
}

fn payload_from_hex(hex: &str) -> Result<Vec<u8>, ReplayError> {
    if hex.len() % 2 != 0 {
        return Err(ReplayError::BadField(format!("odd payload {hex:?}")));
    }
    (0..hex.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&hex[i..i + 2], 16)
                .map_err(|e| ReplayError::BadField(format!("{hex:?}: {e}")))
        })
        .collect()
}

fn leak_device(name: &str) -> Option<LeakDevice> {
    LeakDevice::ALL.into_iter().find(|d| d.to_string() == name)
}

/// Drives the recorded events into a fresh chip with the same seed and
/// model configuration, collecting every divergence.
pub fn replay_trace(
    events: &[TraceEvent],
    variant: ChipVariant,
    seed: u64,
    model: ModelConfig,
    plan: &MeasurePlan,
) -> Result<ReplayReport, ReplayError> {
    let mut chip =
        Chip::new(variant, seed, model).map_err(|e| ReplayError::Model(e.to_string()))?;
    let mut board = Board::default();
    let mut report = ReplayReport::default();

    for event in events {
        if event.t_ns > chip.sim_time_ns {
            chip.step(event.t_ns - chip.sim_time_ns);
        }
        report.events_applied += 1;
        let mut diverged = |what: String| report.mismatches.push(format!("t={}: {what}", event.t_ns));

        match &event.kind {
            TraceKind::RunStart { chip_seed, .. } => {
                if *chip_seed != seed {
                    diverged(format!("trace was recorded with seed {chip_seed}, not {seed}"));
                }
            }
            TraceKind::ProgramBehavior {
                latency_ns,
                result_addr,
                output,
            } => {
                let output = output
                    .iter()
                    .map(|w| parse_hex_u32(w))
                    .collect::<Result<Vec<_>, _>>()?;
                chip.set_program_behavior(ProgramBehavior {
                    latency_ns: *latency_ns,
                    result_addr: parse_hex_u32(result_addr)?,
                    output,
                });
            }
            TraceKind::DacFrame { addr7, payload_hex } => {
                let frame = I2cFrame {
                    addr7: *addr7,
                    payload: payload_from_hex(payload_hex)?,
                };
                if let Err(err) = board.apply_frame(&mut chip, &frame) {
                    diverged(format!("dac frame failed: {err}"));
                }
            }
            TraceKind::ScanShift { bits_len, bits_hex } => {
                let bits = BitVector::from_hex(bits_hex, *bits_len)
                    .map_err(|e| ReplayError::BadField(e.to_string()))?;
                if let Err(err) = chip.shift_scan(&bits) {
                    diverged(format!("scan shift failed: {err}"));
                }
            }
            TraceKind::BaseReset => {
                if let Err(err) = chip.base_reset() {
                    diverged(format!("base reset failed: {err}"));
                }
            }
            TraceKind::DapEnable => {
                if let Err(err) = chip.enable_dap() {
                    diverged(format!("dap enable failed: {err}"));
                }
            }
            TraceKind::DapWrite { addr, data } => {
                let txn = DapTransaction::write(parse_hex_u32(addr)?, parse_hex_u32(data)?);
                // Faulted writes were recorded like clean ones; either way
                // the replayed chip reacts identically.
                let _ = chip.dap_access(txn);
            }
            TraceKind::DapRead { addr, data } => {
                let txn = DapTransaction::read(parse_hex_u32(addr)?);
                match (chip.dap_access(txn), data.as_str()) {
                    (Err(_), "fault") => {}
                    (Ok(word), recorded) if recorded != "fault" => {
                        let expected = parse_hex_u32(recorded)?;
                        if word != expected {
                            diverged(format!(
                                "read {addr} returned {}, trace has {recorded}",
                                hex_word(word)
                            ));
                        }
                    }
                    (Ok(word), _) => {
                        diverged(format!("read {addr} returned {}, trace has fault", hex_word(word)))
                    }
                    (Err(err), recorded) => {
                        diverged(format!("read {addr} faulted ({err}), trace has {recorded}"))
                    }
                }
            }
            TraceKind::AdcSample { channel, raw_code } => {
                let recomputed = match channel.as_str() {
                    "i_core_active" | "i_core_sleep" => {
                        current_to_adc(chip.current_draw(Rail::CoreVdd), &plan.core_channel)
                    }
                    "i_sram" => current_to_adc(chip.current_draw(Rail::SramVdd), &plan.sram_channel),
                    other => {
                        diverged(format!("unknown adc channel {other:?}"));
                        continue;
                    }
                };
                if recomputed != *raw_code {
                    diverged(format!(
                        "adc {channel}: recomputed {recomputed}, trace has {raw_code}"
                    ));
                }
            }
            TraceKind::LeakSample { channel, raw_code } => {
                let Some(device) = leak_device(channel) else {
                    diverged(format!("unknown leak channel {channel:?}"));
                    continue;
                };
                match chip.leakage_current(device) {
                    Ok(i_na) => {
                        let recomputed = leakage_to_adc(i_na, &plan.leak_chain);
                        if recomputed != *raw_code {
                            diverged(format!(
                                "leak {channel}: recomputed {recomputed}, trace has {raw_code}"
                            ));
                        }
                    }
                    Err(err) => diverged(format!("leak {channel} failed: {err}")),
                }
            }
            TraceKind::RoCount { ro_idx, raw_code } => {
                match measure_frequency(&chip, usize::from(*ro_idx), &plan.gate) {
                    Ok(count) => {
                        if count != *raw_code {
                            diverged(format!(
                                "ro {ro_idx}: recomputed {count}, trace has {raw_code}"
                            ));
                        }
                    }
                    Err(err) => diverged(format!("ro {ro_idx} failed: {err}")),
                }
            }
            TraceKind::Sync { .. } | TraceKind::Step { .. } | TraceKind::RunEnd { .. } => {}
        }
    }
    Ok(report)
}
