//! CSV export of measurement records: fixed column order, 6 significant
//! digits, LF line endings, empty fields for absent readings.

use thiserror::Error;

use crate::chip::ChipVariant;
use crate::codecs::scan::{ClkSel, PllConfig};
use crate::record::{LeakReadings, MeasurementRecord, SaturationFlags};

pub const CSV_HEADER: &str = "chip_id,variant,vcore_mV,vsram_mV,pll_m,pll_n,clk_sel,f_clk_MHz,\
i_core_active_mA,i_core_sleep_mA,i_sram_mA,leak_rvtp_nA,leak_rvtn_nA,leak_hvtp_nA,leak_hvtn_nA,\
fmax_est_MHz,result_ok,seed";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unexpected header: {0}")]
    BadHeader(String),
}

/// Formats a number to 6 significant digits in plain decimal notation.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let decimals = (5 - x.abs().log10().floor() as i32).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

fn opt_field(x: Option<f64>) -> String {
    x.map(format_sig6).unwrap_or_default()
}

/// Serializes records in deterministic order. An empty list yields the
/// header line alone.
pub fn export_csv(records: &[MeasurementRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 128);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let fields = [
            r.chip_id.to_string(),
            r.variant.to_string(),
            r.vcore_mv.to_string(),
            r.vsram_mv.to_string(),
            r.pll.mult_m.to_string(),
            r.pll.div_n.to_string(),
            r.pll.clk_sel.to_string(),
            format_sig6(r.f_clk_mhz),
            opt_field(r.i_core_active_ma),
            opt_field(r.i_core_sleep_ma),
            opt_field(r.i_sram_ma),
            opt_field(r.leak_na.rvtp_na),
            opt_field(r.leak_na.rvtn_na),
            opt_field(r.leak_na.hvtp_na),
            opt_field(r.leak_na.hvtn_na),
            opt_field(r.fmax_est_mhz),
            r.result_ok.to_string(),
            r.seed.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>, CsvError> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|e| CsvError::Malformed {
            line,
            message: format!("bad float {field:?}: {e}"),
        })
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize) -> Result<T, CsvError>
where
    T::Err: std::fmt::Display,
{
    field.parse().map_err(|e| CsvError::Malformed {
        line,
        message: format!("bad field {field:?}: {e}"),
    })
}

/// Reads an exported CSV back into records. Trace-only fields (sample
/// timestamps, saturation flags) do not survive the round trip.
pub fn parse_csv(text: &str) -> Result<Vec<MeasurementRecord>, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, header)) => return Err(CsvError::BadHeader(header.to_string())),
        None => return Err(CsvError::BadHeader(String::new())),
    }
    let mut records = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 18 {
            return Err(CsvError::Malformed {
                line,
                message: format!("{} fields, expected 18", fields.len()),
            });
        }
        let variant = match fields[1] {
            "Michigan" => ChipVariant::Michigan,
            "UCLA" => ChipVariant::Ucla,
            other => {
                return Err(CsvError::Malformed {
                    line,
                    message: format!("unknown variant {other:?}"),
                })
            }
        };
        let clk_sel = match fields[6] {
            "HCLK" => ClkSel::Hclk,
            "PLL" => ClkSel::Pll,
            other => {
                return Err(CsvError::Malformed {
                    line,
                    message: format!("unknown clock select {other:?}"),
                })
            }
        };
        let leak_na = LeakReadings {
            rvtp_na: parse_opt(fields[11], line)?,
            rvtn_na: parse_opt(fields[12], line)?,
            hvtp_na: parse_opt(fields[13], line)?,
            hvtn_na: parse_opt(fields[14], line)?,
        };
        let sensors_absent = variant == ChipVariant::Michigan;
        records.push(MeasurementRecord {
            chip_id: parse_field(fields[0], line)?,
            variant,
            vcore_mv: parse_field(fields[2], line)?,
            vsram_mv: parse_field(fields[3], line)?,
            pll: PllConfig::new(
                parse_field(fields[4], line)?,
                parse_field(fields[5], line)?,
                clk_sel,
            ),
            f_clk_mhz: parse_field(fields[7], line)?,
            i_core_active_ma: parse_opt(fields[8], line)?,
            i_core_sleep_ma: parse_opt(fields[9], line)?,
            i_sram_ma: parse_opt(fields[10], line)?,
            leak_na,
            fmax_est_mhz: parse_opt(fields[15], line)?,
            saturation: SaturationFlags::default(),
            result_ok: parse_field(fields[16], line)?,
            sensors_absent,
            seed: parse_field(fields[17], line)?,
            sample_t_ns: Vec::new(),
        });
    }
    Ok(records)
}
