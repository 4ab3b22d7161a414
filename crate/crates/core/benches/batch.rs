use adaptive_apg::exec::Execution;
use adaptive_apg::verification::{run_battery, Battery};
use criterion::{criterion_group, criterion_main, Criterion};

fn estimator_battery(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimator-battery");
    group.sample_size(10);
    for (label, mode) in [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ] {
        group.bench_function(label, |b| {
            b.iter(|| run_battery(Battery::Estimator, 0, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, estimator_battery);
criterion_main!(benches);
