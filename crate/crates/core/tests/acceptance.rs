//! Acceptance suite: one test per criterion, each printing a pass line
//! with its runtime budget. Run with `--nocapture` to see the lines.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use varichar::budget::{budget_report, default_budget_items};
use varichar::chip::{Chip, ChipVariant, ModelConfig};
use varichar::codecs::hex::{parse_hex_image, HexError};
use varichar::codecs::i2c::{dac_frame, parse_dac_frame};
use varichar::codecs::scan::{decode_scan, encode_scan, ClkSel, PllConfig, ScanImage};
use varichar::config::SweepConfig;
use varichar::controller::{MasterStep, RunOutcome};
use varichar::export::export_csv;
use varichar::power::{
    default_rails, power_down, power_up, Board, PowerSequence, Rail, SequenceStep,
};
use varichar::sensing::{
    amplifier_gain, count_for, current_from_code, current_to_adc, freq_from_count,
    leakage_from_code, leakage_to_adc, power_estimate, read_count_byte, FreqGateSpec,
    LeakageChainSpec, OutputSelect, SenseChannelSpec,
};
use varichar::stats::summarize;
use varichar::sweep::{run_single, run_sweep, ExecMode};

fn finish(criterion: u32, what: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    println!(
        "acceptance {criterion} ({what}): PASS in {:.1} ms (budget {:?})",
        elapsed.as_secs_f64() * 1e3,
        budget
    );
    assert!(
        elapsed < budget,
        "criterion {criterion} took {elapsed:?}, budget {budget:?}"
    );
}

#[test]
fn acceptance_1_design_point_arithmetic() {
    let t0 = Instant::now();
    let core = SenseChannelSpec::core(0.0);

    // 15 mA across three parallel 1 ohm resistors: the 5 mV active drop.
    let active_drop = core.drop_mv(15.0);
    assert!((active_drop - 5.0).abs() < 1e-12, "active drop {active_drop}");
    // 1 mA: 1/3 mV, the quoted 0.3 mV treated as rounding.
    let sleep_drop = core.drop_mv(1.0);
    assert!((sleep_drop - 1.0 / 3.0).abs() < 1e-15, "sleep drop {sleep_drop}");

    // G = 1 + 100k / (100k/199) = 200.
    let gain = amplifier_gain(100_000.0 / 199.0).unwrap();
    assert!((gain - 200.0).abs() < 0.01, "gain {gain}");

    // Chip power at 3.3 V / 15 mA, within 5% of the quoted 50 mW.
    let chip_mw = power_estimate(3300.0, 15.0);
    assert_eq!(chip_mw, 49.5);
    assert!((chip_mw - 50.0).abs() / 50.0 < 0.05);

    finish(1, "design-point arithmetic", t0, Duration::from_secs(1));
}

#[test]
fn acceptance_2_codec_soundness() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5CAB);

    for variant in [ChipVariant::Michigan, ChipVariant::Ucla] {
        for _ in 0..10_000 {
            let image = ScanImage {
                reset: rng.gen(),
                core_reset: match variant {
                    ChipVariant::Michigan => Some(rng.gen()),
                    ChipVariant::Ucla => None,
                },
                pll: PllConfig::new(
                    rng.gen(),
                    rng.gen(),
                    if rng.gen() { ClkSel::Pll } else { ClkSel::Hclk },
                ),
            };
            let bits = encode_scan(&image, variant).unwrap();
            assert_eq!(bits.len(), variant.scan_length());
            assert_eq!(decode_scan(&bits, variant).unwrap(), image);
        }
    }

    for _ in 0..10_000 {
        let channel = rng.gen_range(0u8..8);
        let code = rng.gen_range(0u16..4096);
        assert_eq!(parse_dac_frame(&dac_frame(channel, code)).unwrap(), (channel, code));
    }

    for count in 0..=u16::MAX {
        let hi = read_count_byte(count, OutputSelect::High);
        let lo = read_count_byte(count, OutputSelect::Low);
        assert_eq!((u16::from(hi) << 8) | u16::from(lo), count);
    }

    hex_corpus();

    finish(2, "codec soundness", t0, Duration::from_secs(5));
}

/// >= 20 Intel-HEX inputs that must parse or be rejected for the right
/// reason.
fn hex_corpus() {
    let ok = |text: &str| {
        parse_hex_image(text).unwrap_or_else(|e| panic!("expected parse of {text:?}, got {e}"))
    };

    // Valid images.
    assert!(ok(":00000001FF\n").is_empty());
    assert_eq!(ok(":0400100001020304E2\n:00000001FF\n").len(), 4);
    assert_eq!(ok(":0400100001020304E2\r\n:00000001FF\r\n").len(), 4); // CRLF
    assert_eq!(ok(":0400100001020304E2\n\n:00000001FF\n").len(), 4); // blank line
    assert_eq!(
        ok(":020000042000DA\n:040000001122334452\n:00000001FF\n").base_addr(),
        0x2000_0000
    );
    assert_eq!(ok(":01001000AA45\n:01001200BB32\n:00000001FF\n").len(), 2); // gap
    assert_eq!(ok(":10000000000102030405060708090A0B0C0D0E0F78\n:00000001FF\n").len(), 16);
    assert_eq!(ok(":0100000000FF\n:00000001FF\n").get(0), Some(0));
    // Two extended-address segments.
    assert_eq!(
        ok(":020000042000DA\n:01000000AA55\n:020000043000CA\n:01000000BB44\n:00000001FF\n")
            .len(),
        2
    );
    // Data after EOF is ignored.
    assert!(ok(":00000001FF\n:0400100001020304E2\n").is_empty());

    // Rejections.
    let cases: Vec<(&str, fn(&HexError) -> bool)> = vec![
        (":0400100001020304E3\n:00000001FF\n", |e| {
            matches!(e, HexError::BadChecksum { line: 1 })
        }),
        (":00000001FE\n", |e| matches!(e, HexError::BadChecksum { .. })),
        (":0100000000FE\n:00000001FF\n", |e| {
            matches!(e, HexError::BadChecksum { .. })
        }),
        (":0400100001020304E2\n", |e| matches!(e, HexError::MissingEof)),
        ("", |e| matches!(e, HexError::MissingEof)),
        (":0100100001EE\n:0100100002ED\n:00000001FF\n", |e| {
            matches!(e, HexError::OverlappingData { .. })
        }),
        ("0400100001020304E2\n:00000001FF\n", |e| {
            matches!(e, HexError::MalformedRecord { .. })
        }),
        (":040010000102030E2\n:00000001FF\n", |e| {
            matches!(e, HexError::MalformedRecord { .. }) // odd digit count
        }),
        (":04001000010203ZZE2\n:00000001FF\n", |e| {
            matches!(e, HexError::MalformedRecord { .. }) // bad hex digits
        }),
        (":0000\n:00000001FF\n", |e| {
            matches!(e, HexError::MalformedRecord { .. }) // too short
        }),
        (":0500100001020304E1\n:00000001FF\n", |e| {
            matches!(e, HexError::MalformedRecord { .. }) // length mismatch
        }),
        (":01000001FE\n", |e| {
            matches!(e, HexError::MalformedRecord { .. }) // EOF with data
        }),
        (":0400000300003800C1\n:00000001FF\n", |e| {
            matches!(e, HexError::MalformedRecord { .. }) // type 03
        }),
        (":020000020000FC\n:00000001FF\n", |e| {
            matches!(e, HexError::MalformedRecord { .. }) // type 02
        }),
        (":0400000512345678E3\n:00000001FF\n", |e| {
            matches!(e, HexError::MalformedRecord { .. }) // type 05
        }),
        (":030000042000D9\n:00000001FF\n", |e| {
            matches!(e, HexError::MalformedRecord { .. }) // type 04 wrong length
        }),
    ];
    for (text, check) in cases {
        let err = parse_hex_image(text)
            .expect_err(&format!("expected rejection of {text:?}"));
        assert!(check(&err), "{text:?} rejected with unexpected error {err}");
    }
}

#[test]
fn acceptance_3_measurement_chain_accuracy() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC3);

    // Current: 1e3 random points, error below one input-referred LSB
    // (3.3/1024 / 200 / (1/3) = 0.0483984... mA, quoted as 0.0484).
    let core = SenseChannelSpec::core(0.0);
    let lsb_ma = core.input_lsb_ma();
    assert!(lsb_ma <= 0.0484);
    for _ in 0..1000 {
        let i_ma = rng.gen_range(0.0..49.5);
        let recovered = current_from_code(current_to_adc(i_ma, &core), &core).value;
        assert!(
            (recovered - i_ma).abs() < lsb_ma,
            "current {i_ma} recovered {recovered}"
        );
    }

    // Leakage: error below one LSB = 1 nF x (3.3/1024 V) / 10 ms
    // = 0.3222656 nA, quoted as 0.322.
    let chain = LeakageChainSpec::default();
    let lsb_na = chain.input_lsb_na();
    assert!((lsb_na - 0.322).abs() < 0.001);
    for _ in 0..1000 {
        let i_na = rng.gen_range(0.0..330.0);
        let recovered = leakage_from_code(leakage_to_adc(i_na, &chain), &chain).value;
        assert!(
            (recovered - i_na).abs() < lsb_na,
            "leakage {i_na} recovered {recovered}"
        );
    }

    // Frequency: error below one count = 1 kHz at the 1 ms gate.
    let gate = FreqGateSpec::default();
    for _ in 0..1000 {
        let f_mhz = rng.gen_range(0.0..=65.535);
        let recovered = freq_from_count(count_for(f_mhz, &gate), &gate).value;
        assert!(
            (recovered - f_mhz).abs() < 0.001,
            "freq {f_mhz} recovered {recovered}"
        );
    }

    finish(3, "measurement-chain accuracy", t0, Duration::from_secs(5));
}

#[test]
fn acceptance_4_closed_loop() {
    let t0 = Instant::now();
    let cfg = SweepConfig::default();
    let program = cfg.resolve_program(std::path::Path::new(".")).unwrap();

    let (record, _) = run_single(&cfg, &program, None).unwrap();
    assert!(record.result_ok);
    assert_eq!(record.outcome, RunOutcome::Completed);
    let expected: Vec<u8> = MasterStep::ALL.iter().map(|s| s.number()).collect();
    assert_eq!(record.step_t_ns.keys().copied().collect::<Vec<_>>(), expected);
    let times: Vec<u64> = record.step_t_ns.values().copied().collect();
    assert!(times.windows(2).all(|w| w[0] < w[1]));

    for skip in 4..=8u8 {
        let (record, _) = run_single(&cfg, &program, Some(skip)).unwrap();
        assert!(!record.result_ok, "skipping step {skip} still passed");
        assert!(matches!(
            record.outcome,
            RunOutcome::Timeout | RunOutcome::VerifyMismatch
        ));
    }

    finish(4, "closed loop", t0, Duration::from_secs(1));
}

#[test]
fn acceptance_5_sequencing_safety() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EC5);
    let rails = default_rails();
    let step = |rail: Rail, target_mv: f64, dwell_ns: u64| SequenceStep {
        rail,
        target_mv,
        dwell_ns,
    };
    let nominal = |rail: Rail| rails[rail.index()].nominal_mv;

    let shuffled_rest = |rng: &mut ChaCha8Rng| {
        let mut rest: Vec<Rail> = Rail::ALL.into_iter().filter(|&r| r != Rail::Dvdd).collect();
        for i in (1..rest.len()).rev() {
            rest.swap(i, rng.gen_range(0..=i));
        }
        rest
    };

    // 1e3 valid sequences: DVDD first on up, reverse order down.
    for _ in 0..1000 {
        let mut order = vec![Rail::Dvdd];
        order.extend(shuffled_rest(&mut rng));
        let steps = order
            .iter()
            .map(|&r| step(r, nominal(r), rng.gen_range(1..2_000_000)))
            .collect();
        let seq = PowerSequence::new(steps).unwrap();

        let mut chip = Chip::new(ChipVariant::Ucla, rng.gen(), ModelConfig::default()).unwrap();
        let mut board = Board::default();
        let up = power_up(&seq, &mut board.dac, &board.rails, board.dac_addr7).unwrap();
        board.apply_plan(&mut chip, &up, 0).unwrap();
        assert!(!chip.core.latchup, "valid up-sequence latched: {order:?}");
        let down = power_down(&seq, &mut board.dac, &board.rails, board.dac_addr7);
        let t = chip.sim_time_ns;
        board.apply_plan(&mut chip, &down, t).unwrap();
        assert!(!chip.core.latchup, "valid down-sequence latched: {order:?}");
    }

    // 1e3 violating sequences: a core rail rises before DVDD, or DVDD
    // falls while a core rail is still energized. The sticky flag clears
    // on full power-down by design, so observe it as frames land.
    for case in 0..1000 {
        let core_rail = if rng.gen() { Rail::CoreVdd } else { Rail::SramVdd };
        let mut chip = Chip::new(ChipVariant::Ucla, rng.gen(), ModelConfig::default()).unwrap();
        let mut board = Board::default();
        let mut latched = false;
        if case % 2 == 0 {
            // Core rail first on the way up.
            let mut order = vec![core_rail];
            order.extend(Rail::ALL.into_iter().filter(|&r| r != core_rail));
            let steps = order.iter().map(|&r| step(r, nominal(r), 1000)).collect();
            let seq = PowerSequence::new(steps).unwrap();
            let up = power_up(&seq, &mut board.dac, &board.rails, board.dac_addr7).unwrap();
            for (_, frame) in &up {
                board.apply_frame(&mut chip, frame).unwrap();
                latched |= chip.core.latchup;
            }
        } else {
            // Valid up, then DVDD dropped first on the way down.
            let up_seq = PowerSequence::default_up();
            let up = power_up(&up_seq, &mut board.dac, &board.rails, board.dac_addr7).unwrap();
            board.apply_plan(&mut chip, &up, 0).unwrap();
            assert!(!chip.core.latchup);
            // power_down reverses the given order, so DVDD last here means
            // DVDD is zeroed first.
            let mut order = shuffled_rest(&mut rng);
            order.push(Rail::Dvdd);
            let steps = order.iter().map(|&r| step(r, nominal(r), 1000)).collect();
            let down_seq = PowerSequence::new(steps).unwrap();
            let down = power_down(&down_seq, &mut board.dac, &board.rails, board.dac_addr7);
            for (_, frame) in &down {
                board.apply_frame(&mut chip, frame).unwrap();
                latched |= chip.core.latchup;
            }
        }
        assert!(latched, "violating sequence {case} did not latch");
    }

    finish(5, "sequencing safety", t0, Duration::from_secs(5));
}

#[test]
fn acceptance_6_variability_reproduction() {
    let t0 = Instant::now();
    use rayon::prelude::*;

    let passes: u32 = (0u64..100)
        .into_par_iter()
        .map(|master_seed| {
            let mut cfg = SweepConfig {
                n_chips: 200,
                seed: master_seed,
                ..SweepConfig::default()
            };
            cfg.ro_indices = vec![0];
            let program = cfg.resolve_program(std::path::Path::new(".")).unwrap();
            let out = run_sweep(&cfg, &program, ExecMode::Serial, false).unwrap();
            let stats = summarize(&out.records).unwrap();
            u32::from(stats.leakage_cov_exceeds_active == Some(true))
        })
        .sum();

    assert!(passes >= 99, "CoV ordering held for only {passes}/100 seeds");
    finish(6, "variability reproduction", t0, Duration::from_secs(30));
}

#[test]
fn acceptance_7_determinism() {
    let t0 = Instant::now();
    let cfg = SweepConfig {
        n_chips: 3,
        vcore_mv: vec![800, 900],
        seed: 3,
        ..SweepConfig::default()
    };
    let program = cfg.resolve_program(std::path::Path::new(".")).unwrap();

    let a = run_sweep(&cfg, &program, ExecMode::Serial, true).unwrap();
    let b = run_sweep(&cfg, &program, ExecMode::Serial, true).unwrap();
    assert_eq!(export_csv(&a.records), export_csv(&b.records));
    assert_eq!(a.trace_jsonl, b.trace_jsonl);

    let p = run_sweep(&cfg, &program, ExecMode::Parallel, true).unwrap();
    assert_eq!(export_csv(&a.records), export_csv(&p.records));
    assert_eq!(a.trace_jsonl, p.trace_jsonl);

    finish(7, "determinism", t0, Duration::from_secs(30));
}

#[test]
fn acceptance_8_budget_reporting() {
    let t0 = Instant::now();
    let report = budget_report(&default_budget_items(), 3300.0, 15.0).unwrap();
    assert_eq!(report.total_mw, 1450.0);
    assert_eq!(report.chip_mw, 49.5);
    let expected_ratio = 49.5 / 1450.0;
    assert!((report.chip_to_external_ratio - expected_ratio).abs() < 1e-12);
    assert!((report.chip_to_external_ratio - 0.034).abs() < 0.001);
    finish(8, "budget reporting", t0, Duration::from_secs(1));
}
