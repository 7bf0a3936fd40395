//! Population statistics over measurement records.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::record::MeasurementRecord;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("need at least 2 records, got {0}")]
    TooFewRecords(usize),
}

/// Sample statistics of one metric (n-1 denominator). `cov` is only
/// defined for a positive mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricStats {
    pub n: usize,
    pub mean: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
    pub cov: Option<f64>,
}

pub fn metric_stats(values: &[f64]) -> Option<MetricStats> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let stddev = var.sqrt();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(MetricStats {
        n,
        mean,
        stddev,
        min,
        max,
        cov: (mean > 0.0).then(|| stddev / mean),
    })
}

/// Per-metric statistics plus the headline variability comparison:
/// leakage spreads far more than active current across a population.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryStats {
    pub metrics: BTreeMap<String, MetricStats>,
    /// CoV(RVTN leakage) > CoV(active core current), when both are defined.
    pub leakage_cov_exceeds_active: Option<bool>,
}

pub const METRIC_NAMES: [&str; 9] = [
    "f_clk_mhz",
    "i_core_active_ma",
    "i_core_sleep_ma",
    "i_sram_ma",
    "leak_rvtp_na",
    "leak_rvtn_na",
    "leak_hvtp_na",
    "leak_hvtn_na",
    "fmax_est_mhz",
];

fn metric_values(records: &[MeasurementRecord], name: &str) -> Vec<f64> {
    records
        .iter()
        .filter_map(|r| match name {
            "f_clk_mhz" => Some(r.f_clk_mhz),
            "i_core_active_ma" => r.i_core_active_ma,
            "i_core_sleep_ma" => r.i_core_sleep_ma,
            "i_sram_ma" => r.i_sram_ma,
            "leak_rvtp_na" => r.leak_na.rvtp_na,
            "leak_rvtn_na" => r.leak_na.rvtn_na,
            "leak_hvtp_na" => r.leak_na.hvtp_na,
            "leak_hvtn_na" => r.leak_na.hvtn_na,
            "fmax_est_mhz" => r.fmax_est_mhz,
            _ => None,
        })
        .collect()
}

/// Sample statistics for every metric with at least two present values.
pub fn summarize(records: &[MeasurementRecord]) -> Result<SummaryStats, StatsError> {
    if records.len() < 2 {
        return Err(StatsError::TooFewRecords(records.len()));
    }
    let mut metrics = BTreeMap::new();
    for name in METRIC_NAMES {
        if let Some(stats) = metric_stats(&metric_values(records, name)) {
            metrics.insert(name.to_string(), stats);
        }
    }
    let leakage_cov_exceeds_active = match (
        metrics.get("leak_rvtn_na").and_then(|m| m.cov),
        metrics.get("i_core_active_ma").and_then(|m| m.cov),
    ) {
        (Some(leak), Some(active)) => Some(leak > active),
        _ => None,
    };
    Ok(SummaryStats {
        metrics,
        leakage_cov_exceeds_active,
    })
}
