//! Command-line surface: single closed-loop runs, grid sweeps with file
//! outputs, statistics reports over exported CSVs, and power-budget
//! reports.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 run failure (every
//! point failed).

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use varichar::budget::{budget_report, render_budget, BudgetItem};
use varichar::config::{parse_config, SweepConfig};
use varichar::export::{export_csv, parse_csv};
use varichar::stats::summarize;
use varichar::sweep::{manifest_json, run_single, run_sweep, ExecMode};

/// Seed override honored by `single` and `sweep`.
const SEED_ENV: &str = "VARICHAR_SEED";

#[derive(Parser)]
#[command(
    name = "varichar",
    version,
    about = "Closed-loop variability characterization platform (simulated)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one chip through one grid point and print the run record.
    Single {
        #[arg(long)]
        config: PathBuf,
        /// Skip one of steps 4..=8 to exercise fault handling.
        #[arg(long, value_parser = clap::value_parser!(u8).range(4..=8))]
        fault_skip_step: Option<u8>,
    },
    /// Run the full population x grid sweep and write records.csv,
    /// manifest.json and trace.jsonl into the output directory.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run chips concurrently; output is byte-identical to serial.
        #[arg(long)]
        parallel: bool,
    },
    /// Summarize an exported records.csv.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Power-budget report over a JSON item list.
    Budget {
        #[arg(long)]
        items: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help/version are not errors.
            if err.use_stderr() {
                eprintln!("{err}");
                std::process::exit(1);
            }
            print!("{err}");
            std::process::exit(0);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn load_config(path: &Path) -> Result<(SweepConfig, PathBuf)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut cfg = parse_config(&text)?;
    if let Ok(seed) = std::env::var(SEED_ENV) {
        cfg.seed = seed
            .parse()
            .with_context(|| format!("{SEED_ENV} must be an unsigned integer, got {seed:?}"))?;
    }
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok((cfg, base_dir))
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Single {
            config,
            fault_skip_step,
        } => {
            let (cfg, base_dir) = load_config(&config)?;
            let program = cfg.resolve_program(&base_dir)?;
            let (record, _trace) = run_single(&cfg, &program, fault_skip_step)?;
            println!("{}", serde_json::to_string_pretty(&record)?);
            Ok(if record.result_ok { 0 } else { 2 })
        }
        Command::Sweep {
            config,
            out,
            parallel,
        } => {
            let (cfg, base_dir) = load_config(&config)?;
            let program = cfg.resolve_program(&base_dir)?;
            let mode = if parallel {
                ExecMode::Parallel
            } else {
                ExecMode::Serial
            };
            let output = run_sweep(&cfg, &program, mode, true)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            std::fs::write(out.join("records.csv"), export_csv(&output.records))?;
            std::fs::write(
                out.join("manifest.json"),
                manifest_json(&cfg, output.records.len()),
            )?;
            std::fs::write(out.join("trace.jsonl"), &output.trace_jsonl)?;
            let passed = output.records.iter().filter(|r| r.result_ok).count();
            println!(
                "{} of {} points passed; outputs in {}",
                passed,
                output.records.len(),
                out.display()
            );
            Ok(if passed == 0 { 2 } else { 0 })
        }
        Command::Report { input } => {
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let records = parse_csv(&text)?;
            let stats = summarize(&records)?;
            println!(
                "{:<20} {:>6} {:>12} {:>12} {:>12} {:>12} {:>10}",
                "metric", "n", "mean", "stddev", "min", "max", "cov"
            );
            for (name, m) in &stats.metrics {
                println!(
                    "{:<20} {:>6} {:>12.5} {:>12.5} {:>12.5} {:>12.5} {:>10}",
                    name,
                    m.n,
                    m.mean,
                    m.stddev,
                    m.min,
                    m.max,
                    m.cov.map_or("-".into(), |c| format!("{c:.5}")),
                );
            }
            if let Some(exceeds) = stats.leakage_cov_exceeds_active {
                println!("cov(leak_rvtn) > cov(i_core_active): {exceeds}");
            }
            Ok(0)
        }
        Command::Budget { items } => {
            let text = std::fs::read_to_string(&items)
                .with_context(|| format!("reading {}", items.display()))?;
            let file: BudgetFile = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", items.display()))?;
            let (items, chip_mv, chip_ma) = match file {
                BudgetFile::Bare(items) => (items, 3300.0, 15.0),
                BudgetFile::WithChip {
                    items,
                    chip_mv,
                    chip_ma,
                } => (items, chip_mv, chip_ma),
            };
            let report = budget_report(&items, chip_mv, chip_ma)?;
            print!("{}", render_budget(&report));
            Ok(0)
        }
    }
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum BudgetFile {
    Bare(Vec<BudgetItem>),
    WithChip {
        items: Vec<BudgetItem>,
        #[serde(default = "default_chip_mv")]
        chip_mv: f64,
        #[serde(default = "default_chip_ma")]
        chip_ma: f64,
    },
}

fn default_chip_mv() -> f64 {
    3300.0
}

fn default_chip_ma() -> f64 {
    15.0
}
