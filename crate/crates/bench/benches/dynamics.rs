use criterion::{criterion_group, criterion_main, Criterion};
use horseshoe::cone::{check_return_inclusion, transport, Cone};
use horseshoe::map::{HorseshoeMap, Point, RegionId};
use horseshoe::orbit::first_return;
use horseshoe::sampling::{fold_point, rng};
use std::hint::black_box;

fn dynamics(c: &mut Criterion) {
    let map = HorseshoeMap::default();
    let p = Point::new(0.5, 0.75);
    c.bench_function("step", |b| b.iter(|| map.step(black_box(p))));
    c.bench_function("jacobian", |b| b.iter(|| map.jacobian(black_box(p))));
    let j = map.jacobian_with(RegionId::R4, p);
    c.bench_function("transport", |b| {
        b.iter(|| transport(black_box(&Cone::symmetric(0.1)), black_box(&j)))
    });

    let mut r = rng(0);
    let starts: Vec<Point> = (0..256).map(|_| fold_point(&map, &mut r).1).collect();
    c.bench_function("first_return x256", |b| {
        b.iter(|| {
            starts
                .iter()
                .filter_map(|&s| first_return(&map, s, 10_000).ok())
                .count()
        })
    });
    c.bench_function("return_inclusion x256", |b| {
        b.iter(|| {
            starts
                .iter()
                .filter_map(|&s| check_return_inclusion(&map, s, 10_000).ok())
                .count()
        })
    });
}

criterion_group!(benches, dynamics);
criterion_main!(benches);
