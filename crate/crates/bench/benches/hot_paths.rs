//! Benchmarks for the three paths that dominate wall time: event
//! queue churn, quantized layer execution, and a full simulated day.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use samurai_core::config::SimConfig;
use samurai_core::kernel::EventQueue;
use samurai_core::pneuro::{execute_layer, ExecParams, LayerKind, QuantTensor};
use samurai_core::scenario::{run_day, Variant};
use samurai_core::time::SimTime;

fn bench_event_queue(c: &mut Criterion) {
    c.bench_function("kernel_schedule_pop_1k", |b| {
        b.iter(|| {
            let mut q: EventQueue<u32> = EventQueue::new();
            for i in 0..1000u64 {
                // Interleaved timestamps to exercise ordered insertion.
                let at = SimTime::from_ns((i * 7919) % 100_000);
                q.schedule(at, "bench", i as u32).unwrap();
            }
            while !q.is_empty() {
                black_box(q.advance().unwrap());
            }
        })
    });
}

fn bench_layer(c: &mut Criterion) {
    let input = QuantTensor::new(
        (0..3 * 32 * 32).map(|i| (i % 256) as i16).collect(),
        vec![3, 32, 32],
        0.02,
        12,
        false,
    )
    .unwrap();
    let weights = QuantTensor::new(
        (0..8 * 3 * 3 * 3).map(|i| (i % 255) as i16 - 127).collect(),
        vec![8, 3, 3, 3],
        0.05,
        -3,
        true,
    )
    .unwrap();
    let params = ExecParams {
        relu: true,
        out_scale: 0.1,
        out_zero_point: 4,
    };
    c.bench_function("conv3x3_8x3x32x32", |b| {
        b.iter(|| black_box(execute_layer(LayerKind::Conv3x3, &input, &weights, params).unwrap()))
    });
}

fn bench_day(c: &mut Criterion) {
    let cfg = SimConfig::default();
    let mut group = c.benchmark_group("scenario");
    group.sample_size(10);
    group.bench_function("run_day_edge", |b| {
        b.iter(|| black_box(run_day(&cfg, Variant::Edge, 0).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_event_queue, bench_layer, bench_day);
criterion_main!(benches);
