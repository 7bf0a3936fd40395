use criterion::{criterion_group, criterion_main, Criterion};

use varichar::config::SweepConfig;
use varichar::sweep::{run_single, run_sweep, ExecMode};

fn single_run(c: &mut Criterion) {
    let cfg = SweepConfig::default();
    let program = cfg.resolve_program(std::path::Path::new(".")).unwrap();
    c.bench_function("single_run_traced", |b| {
        b.iter(|| run_single(&cfg, &program, None).unwrap())
    });
}

fn population_sweep(c: &mut Criterion) {
    let cfg = SweepConfig {
        n_chips: 16,
        ..SweepConfig::default()
    };
    let program = cfg.resolve_program(std::path::Path::new(".")).unwrap();
    let mut group = c.benchmark_group("sweep_16_chips");
    group.sample_size(20);
    group.bench_function("serial_untraced", |b| {
        b.iter(|| run_sweep(&cfg, &program, ExecMode::Serial, false).unwrap())
    });
    group.bench_function("parallel_untraced", |b| {
        b.iter(|| run_sweep(&cfg, &program, ExecMode::Parallel, false).unwrap())
    });
    group.finish();
}

criterion_group!(benches, single_run, population_sweep);
criterion_main!(benches);
