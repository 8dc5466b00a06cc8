use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use metanet_bench::build_paper_scenario;
use metanet_core::ctm::CtmS;
use metanet_core::metanet::MetanetS;
use metanet_core::{run, Model, Network, RunOptions};

/// Steps into the peak, where queues and the station are active.
const WARM_UP: u64 = 25_000;
const BATCH: u64 = 1_000;

fn models() -> Vec<Box<dyn Model>> {
    let net = || Network::new(build_paper_scenario()).unwrap();
    vec![Box::new(MetanetS::new(net())), Box::new(CtmS::new(net()).unwrap())]
}

fn steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("steps");
    group.throughput(criterion::Throughput::Elements(BATCH));
    for m in models() {
        let mut state = m.initial_state();
        for _ in 0..WARM_UP {
            m.step(&mut state).unwrap();
        }
        group.bench_function(m.kind().name(), |b| {
            b.iter_batched_ref(
                || state.clone(),
                |s| {
                    for _ in 0..BATCH {
                        black_box(m.step(s).unwrap());
                    }
                },
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn full_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("full run");
    group.sample_size(10);
    for m in models() {
        group.bench_function(m.kind().name(), |b| b.iter(|| run(m.as_ref(), &mut [], &RunOptions::default()).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, steps, full_run);
criterion_main!(benches);
