use criterion::{criterion_group, criterion_main, Criterion};
use horseshoe::map::HorseshoeMap;
use horseshoe::periodic::census;

fn bench_census(c: &mut Criterion) {
    let map = HorseshoeMap::default();
    let mut g = c.benchmark_group("census");
    g.sample_size(10);
    for k in [6, 8, 10] {
        g.bench_function(format!("period {k}"), |b| {
            b.iter(|| census(&map, k).unwrap().orbits.len())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_census);
criterion_main!(benches);
