use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pwc_sbf::synth::{synth_cegs, synth_dual, synth_gd, GdConfig, Problem};
use pwc_sbf::AmbiguitySet;
use pwc_sbf_bench::{bounds_for, spec_with_grid};

fn omax(c: &mut Criterion) {
    let mut group = c.benchmark_group("worst_case_value");
    for k in [10usize, 100, 1000] {
        let lower = vec![0.0; k + 1];
        let upper = vec![2.0 / (k as f64 + 1.0); k + 1];
        let set = AmbiguitySet::from_dense(&lower, &upper).unwrap();
        let values: Vec<f64> = (0..=k).map(|j| ((j * 7919) % 1009) as f64 / 1009.0).collect();
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            b.iter(|| set.worst_case_value(black_box(&values)).unwrap())
        });
    }
    group.finish();
}

fn bounds(c: &mut Criterion) {
    let spec = spec_with_grid("linear2d_convex", &[15, 10]);
    c.bench_function("bounds/linear2d_15x10", |b| b.iter(|| bounds_for(black_box(&spec))));
}

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("synth/linear2d");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for grid in [[4usize, 4], [6, 4]] {
        let spec = spec_with_grid("linear2d_convex", &grid);
        let (bounds, init) = bounds_for(&spec);
        let p = Problem::new(&bounds, &init, spec.horizon);
        let id = format!("{}x{}", grid[0], grid[1]);
        group.bench_function(BenchmarkId::new("dual", &id), |b| b.iter(|| synth_dual(&p).unwrap()));
        group.bench_function(BenchmarkId::new("cegs", &id), |b| b.iter(|| synth_cegs(&p).unwrap()));
        group.bench_function(BenchmarkId::new("gd", &id), |b| {
            b.iter(|| synth_gd(&p, &GdConfig::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, omax, bounds, solvers);
criterion_main!(benches);
