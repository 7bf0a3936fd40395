//! Power-budget reporting for the platform's external components.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensing::power_estimate;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BudgetError {
    #[error("budget item list is empty")]
    NoItems,
}

/// One external component drawing supply power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetItem {
    pub name: String,
    pub volts: f64,
    pub milliamps: f64,
}

impl BudgetItem {
    pub fn new(name: &str, volts: f64, milliamps: f64) -> Self {
        Self {
            name: name.into(),
            volts,
            milliamps,
        }
    }

    pub fn milliwatts(&self) -> f64 {
        self.volts * self.milliamps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub items: Vec<BudgetItem>,
    pub total_mw: f64,
    /// Power the chip itself draws at its operating point.
    pub chip_mw: f64,
    /// chip_mw / total_mw: how small the device under test is next to the
    /// harness around it.
    pub chip_to_external_ratio: f64,
}

/// Sums the item list and relates it to the chip's own power at
/// (`chip_mv`, `chip_ma`).
pub fn budget_report(
    items: &[BudgetItem],
    chip_mv: f64,
    chip_ma: f64,
) -> Result<BudgetReport, BudgetError> {
    if items.is_empty() {
        return Err(BudgetError::NoItems);
    }
    let total_mw: f64 = items.iter().map(BudgetItem::milliwatts).sum();
    let chip_mw = power_estimate(chip_mv, chip_ma);
    Ok(BudgetReport {
        items: items.to_vec(),
        total_mw,
        chip_mw,
        chip_to_external_ratio: chip_mw / total_mw,
    })
}

/// Illustrative external-component list for this board. The two
/// controllers dominate; the set is chosen to land on the platform's
/// 1.45 W total.
pub fn default_budget_items() -> Vec<BudgetItem> {
    vec![
        BudgetItem::new("master_mbed", 5.0, 140.0),
        BudgetItem::new("slave_mbed", 5.0, 120.0),
        BudgetItem::new("analog_buffer", 5.0, 20.0),
        BudgetItem::new("dac", 5.0, 6.0),
        BudgetItem::new("clock_oscillators", 2.5, 8.0),
    ]
}

/// Plain-text table for the CLI.
pub fn render_budget(report: &BudgetReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<20} {:>8} {:>10} {:>10}\n", "item", "volts", "mA", "mW"));
    for item in &report.items {
        out.push_str(&format!(
            "{:<20} {:>8.2} {:>10.2} {:>10.2}\n",
            item.name,
            item.volts,
            item.milliamps,
            item.milliwatts()
        ));
    }
    out.push_str(&format!(
        "{:<20} {:>8} {:>10} {:>10.2}\n",
        "total", "", "", report.total_mw
    ));
    out.push_str(&format!(
        "chip power: {:.2} mW; chip-to-external ratio: {:.4}\n",
        report.chip_mw, report.chip_to_external_ratio
    ));
    out
}
