use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use singlip_bench::{fixture, jet_points};
use singlip_core::cone::nash_fiber;
use singlip_core::pieces::{partition_wedge, WedgeSide};
use singlip_core::{Config, Ray};

fn jets(c: &mut Criterion) {
    let f = fixture("ex32").spec.f;
    let pts = jet_points(1000);
    c.bench_function("jet_1000_points", |b| {
        b.iter(|| {
            pts.iter()
                .filter_map(|&(x, y)| f.jet(black_box(x), black_box(y)).ok())
                .count()
        })
    });
}

fn fibers(c: &mut Criterion) {
    let cfg = Config::default();
    let mut g = c.benchmark_group("nash_fiber");
    g.sample_size(10);
    for name in ["ex31_a1_b1", "ex32"] {
        let s = fixture(name).spec;
        g.bench_function(name, |b| {
            b.iter(|| nash_fiber(black_box(&s), Ray::PosY, &cfg).unwrap())
        });
    }
    g.finish();
}

fn partitions(c: &mut Criterion) {
    let cfg = Config::default();
    let mut g = c.benchmark_group("partition_wedge");
    g.sample_size(10);
    for name in ["ex32", "ex33"] {
        let s = fixture(name).spec;
        g.bench_function(name, |b| {
            b.iter(|| partition_wedge(black_box(&s), Ray::PosY, WedgeSide::Full, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, jets, fibers, partitions);
criterion_main!(benches);
