//! End-to-end tests of the master/slave closed loop.

use varichar::chip::{Chip, ChipVariant, ModelConfig, ProgramBehavior};
use varichar::codecs::scan::{ClkSel, PllConfig};
use varichar::config::SweepConfig;
use varichar::controller::{
    builtin_program, load_program, master_run, sync_exchange, validate_sync, MasterConfig,
    MasterStep, MeasurePlan, PointSettings, RunIds, RunOutcome, SyncMessage,
};
use varichar::power::{Board, PowerSequence};
use varichar::record::MeasurementRecord;
use varichar::replay::replay_trace;
use varichar::sweep::{run_single, ExecMode};
use varichar::trace::{Trace, TraceEvent, TraceKind};

fn default_point() -> PointSettings {
    PointSettings {
        vcore_mv: 900,
        vsram_mv: 900,
        pll: PllConfig::new(5, 1, ClkSel::Pll),
    }
}

fn run_with(
    variant: ChipVariant,
    seed: u64,
    cfg: &MasterConfig,
) -> (varichar::controller::RunRecord, Trace) {
    let mut chip = Chip::new(variant, seed, ModelConfig::default()).unwrap();
    let mut board = Board::default();
    let mut trace = Trace::enabled();
    let program = builtin_program(chip.config().sram_base);
    let record = master_run(
        &mut chip,
        &mut board,
        &PowerSequence::default_up(),
        &program,
        &default_point(),
        &MeasurePlan::default(),
        cfg,
        RunIds {
            chip_id: 0,
            grid_index: 0,
        },
        &mut trace,
    )
    .unwrap();
    (record, trace)
}

#[test]
fn default_run_completes_all_steps_in_order() {
    let (record, _) = run_with(ChipVariant::Ucla, 1, &MasterConfig::default());
    assert!(record.result_ok);
    assert_eq!(record.outcome, RunOutcome::Completed);
    assert!(record.dap_faults.is_empty(), "{:?}", record.dap_faults);

    let expected_steps: Vec<u8> = MasterStep::ALL.iter().map(|s| s.number()).collect();
    let seen: Vec<u8> = record.step_t_ns.keys().copied().collect();
    assert_eq!(seen, expected_steps);
    let times: Vec<u64> = record.step_t_ns.values().copied().collect();
    for pair in times.windows(2) {
        assert!(pair[0] < pair[1], "step timestamps not increasing: {times:?}");
    }
}

#[test]
fn michigan_run_completes_with_sensor_nulls() {
    let (record, _) = run_with(ChipVariant::Michigan, 1, &MasterConfig::default());
    assert!(record.result_ok);
    let m = &record.measurement;
    assert!(m.sensors_absent);
    assert_eq!(m.leak_na.rvtn_na, None);
    assert_eq!(m.fmax_est_mhz, None);
    assert!(m.i_core_active_ma.is_some());
    assert!(m.i_sram_ma.is_some());
}

#[test]
fn measurements_land_at_design_point() {
    let mut cfg = SweepConfig::default();
    cfg.model.active_sigma = 0.0;
    cfg.model.ro_sigma = 0.0;
    cfg.model.leak_sigma = 0.0;
    let program = cfg.resolve_program(std::path::Path::new(".")).unwrap();
    let (record, _) = run_single(&cfg, &program, None).unwrap();
    assert!(record.result_ok);
    let m = &record.measurement;

    // Within one input-referred ADC LSB of the model's 15 mA / 1 mA points.
    let active = m.i_core_active_ma.unwrap();
    assert!((active - 15.0).abs() < 0.05, "active {active}");
    let sleep = m.i_core_sleep_ma.unwrap();
    assert!((sleep - 1.0).abs() < 0.05, "sleep {sleep}");
    let sram = m.i_sram_ma.unwrap();
    assert!((sram - 1.0).abs() < 0.05, "sram {sram}");
    let rvtn = m.leak_na.rvtn_na.unwrap();
    assert!((rvtn - 50.0).abs() < 0.33, "rvtn {rvtn}");
    // 8 planned ROs at ~50 MHz.
    let fmax = m.fmax_est_mhz.unwrap();
    assert!((fmax - 50.0).abs() < 0.1, "fmax {fmax}");
    assert_eq!(m.f_clk_mhz, 100.0);
    assert!(!m.saturation.any());
}

#[test]
fn ro_plan_cardinality() {
    let mut cfg = SweepConfig::default();
    cfg.ro_indices = vec![0, 1, 2, 3];
    let program = cfg.resolve_program(std::path::Path::new(".")).unwrap();
    let (record, trace) = run_single(&cfg, &program, None).unwrap();
    let counts = trace
        .events()
        .iter()
        .filter(|e| matches!(e.kind, TraceKind::RoCount { .. }))
        .count();
    assert_eq!(counts, 4);
    assert!(record.measurement.fmax_est_mhz.is_some());
}

#[test]
fn behavior_mismatch_clears_result_ok() {
    let sram_base = ModelConfig::default().sram_base;
    let cfg = MasterConfig {
        behavior_override: Some(ProgramBehavior {
            latency_ns: 1_000_000,
            result_addr: sram_base + 0x100,
            output: vec![1, 2, 3, 4],
        }),
        ..MasterConfig::default()
    };
    let (record, _) = run_with(ChipVariant::Ucla, 1, &cfg);
    assert!(!record.result_ok);
    assert_eq!(record.outcome, RunOutcome::Timeout);
    // The slave still measured: the program did run.
    assert!(record.measurement.i_core_active_ma.is_some());
}

#[test]
fn fault_skip_matrix_never_passes() {
    for step in 4..=8u8 {
        let cfg = MasterConfig {
            fault_skip_step: Some(step),
            ..MasterConfig::default()
        };
        let (record, _) = run_with(ChipVariant::Ucla, 1, &cfg);
        assert!(!record.result_ok, "skipping step {step} still passed");
        assert!(
            matches!(record.outcome, RunOutcome::Timeout | RunOutcome::VerifyMismatch),
            "skipping step {step} gave {:?}",
            record.outcome
        );
        assert!(!record.step_t_ns.contains_key(&step));
    }
}

#[test]
fn skip_mem_map_times_out() {
    let cfg = MasterConfig {
        fault_skip_step: Some(7),
        ..MasterConfig::default()
    };
    let (record, _) = run_with(ChipVariant::Ucla, 1, &cfg);
    assert_eq!(record.outcome, RunOutcome::Timeout);
}

#[test]
fn measurement_window_lies_between_steps_3_and_9() {
    let (record, _) = run_with(ChipVariant::Ucla, 2, &MasterConfig::default());
    let t3 = record.step_t_ns[&3];
    let t9 = record.step_t_ns[&9];
    assert!(!record.measurement.sample_t_ns.is_empty());
    for (label, t) in &record.measurement.sample_t_ns {
        assert!(
            (t3..=t9).contains(t),
            "sample {label} at {t} outside window [{t3}, {t9}]"
        );
    }
}

#[test]
fn wire_payloads_follow_protocol_order() {
    let (record, trace) = run_with(ChipVariant::Ucla, 3, &MasterConfig::default());
    let t1 = record.step_t_ns[&1];
    let t3 = record.step_t_ns[&3];
    let t9 = record.step_t_ns[&9];
    let t1_start = 0;
    for TraceEvent { t_ns, kind, .. } in trace.events() {
        match kind {
            TraceKind::DacFrame { .. } => {
                assert!((t1_start..=t1).contains(t_ns), "DAC frame at {t_ns} outside step 1")
            }
            TraceKind::ScanShift { .. } => {
                assert!((t1..=t3).contains(t_ns), "scan bits at {t_ns} outside steps 2-3")
            }
            TraceKind::DapWrite { .. } | TraceKind::DapRead { .. } => {
                assert!((t3..=t9).contains(t_ns), "DAP payload at {t_ns} outside steps 4-9")
            }
            _ => {}
        }
    }
}

#[test]
fn sync_exchange_protocol() {
    let record = MeasurementRecord::empty(
        0,
        ChipVariant::Ucla,
        900,
        900,
        PllConfig::new(5, 1, ClkSel::Pll),
        100.0,
        7,
    );
    let messages = sync_exchange(0, &record);
    assert!(matches!(
        messages.as_slice(),
        [SyncMessage::Start, SyncMessage::Progress, SyncMessage::Results(_)]
    ));
    validate_sync(&messages).unwrap();

    // Lossless transfer.
    let SyncMessage::Results(payload) = &messages[2] else {
        panic!("no results message");
    };
    assert_eq!(payload, &record);
    assert_eq!(
        serde_json::to_string(payload).unwrap(),
        serde_json::to_string(&record).unwrap()
    );

    // Results before Start is a protocol violation.
    let bad = vec![SyncMessage::Results(record.clone()), SyncMessage::Start];
    assert!(validate_sync(&bad).is_err());
    assert!(validate_sync(&[SyncMessage::Progress]).is_err());
}

#[test]
fn load_program_contract() {
    let mut chip = Chip::new(ChipVariant::Ucla, 9, ModelConfig::default()).unwrap();
    let base = chip.config().sram_base;
    for rail in varichar::power::Rail::ALL {
        let spec = varichar::power::default_rails()[rail.index()];
        chip.apply_rail(rail, spec.nominal_mv.min(3300.0));
    }
    chip.enable_dap().unwrap();

    // Not halted yet: precondition violation.
    let program = builtin_program(base);
    assert!(load_program(&mut chip, &program).is_err());

    chip.dap_access(varichar::codecs::dhcsr_debug_enable()).unwrap();
    let words = load_program(&mut chip, &program).unwrap();
    assert_eq!(words, 8);

    // 16-byte image writes 4 words.
    let small = varichar::controller::TestProgram {
        image: varichar::codecs::HexImage::from_bytes(base, &[0xAB; 16]),
        base_addr: base,
        latency_ns: 1_000,
        result_addr: base + 0x40,
        expected_words: vec![1],
    };
    assert_eq!(load_program(&mut chip, &small).unwrap(), 4);
}

#[test]
fn same_seed_reproduces_identical_run() {
    let (a, trace_a) = run_with(ChipVariant::Ucla, 11, &MasterConfig::default());
    let (b, trace_b) = run_with(ChipVariant::Ucla, 11, &MasterConfig::default());
    assert_eq!(a, b);
    assert_eq!(trace_a.to_jsonl(), trace_b.to_jsonl());
}

#[test]
fn recorded_trace_replays_cleanly() {
    let cfg = SweepConfig::default();
    let program = cfg.resolve_program(std::path::Path::new(".")).unwrap();
    let (record, trace) = run_single(&cfg, &program, None).unwrap();
    assert!(record.result_ok);

    let events = Trace::parse_jsonl(&trace.to_jsonl()).unwrap();
    let seed = record.measurement.seed;
    let report = replay_trace(
        &events,
        cfg.variant,
        seed,
        cfg.model.clone(),
        &MeasurePlan::default(),
    )
    .unwrap();
    assert!(report.is_clean(), "mismatches: {:#?}", report.mismatches);
    assert_eq!(report.events_applied, events.len());
}

#[test]
fn sweep_modes_agree() {
    let mut cfg = SweepConfig::default();
    cfg.n_chips = 3;
    cfg.vcore_mv = vec![800, 900];
    let program = cfg.resolve_program(std::path::Path::new(".")).unwrap();
    let serial = varichar::sweep::run_sweep(&cfg, &program, ExecMode::Serial, true).unwrap();
    let parallel = varichar::sweep::run_sweep(&cfg, &program, ExecMode::Parallel, true).unwrap();
    assert_eq!(serial.records, parallel.records);
    assert_eq!(serial.trace_jsonl, parallel.trace_jsonl);
    assert_eq!(serial.records.len(), 6);
}
