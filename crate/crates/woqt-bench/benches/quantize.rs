use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use woqt_bench::weights;
use woqt_core::{
    adapt_group_size, dequantize, make_layout, quantize_linear, GroupLayout, LayoutKind,
};

fn bench_quantize(c: &mut Criterion) {
    let (k, n) = (1024usize, 1024usize);
    let w = weights(k, n, 3);

    let mut group = c.benchmark_group("quantize_1024x1024");
    group.throughput(Throughput::Elements((k * n) as u64));
    for bits in [4u8, 8] {
        let layout = make_layout(LayoutKind::FixedGroup, k, n, Some(64), 16).unwrap();
        group.bench_with_input(BenchmarkId::new("linear_g64", bits), &bits, |b, &bits| {
            b.iter(|| black_box(quantize_linear(&w, bits, layout).unwrap()))
        });
    }
    let q = quantize_linear(&w, 4, GroupLayout::per_column(k, n)).unwrap();
    group.bench_function("dequantize_int4_column", |b| {
        b.iter(|| black_box(dequantize(&q).unwrap()))
    });
    group.bench_function("adapt_group_size_alpha0.5", |b| {
        b.iter(|| black_box(adapt_group_size(&w, 0.5, 16).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_quantize);
criterion_main!(benches);
