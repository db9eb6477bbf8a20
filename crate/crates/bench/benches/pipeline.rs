//! Criterion benchmarks for the hot paths: field synthesis (FFT
//! convolution), component labeling, and shortest-path search.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use gaussperc_core::chem::{chemical_diameter, chemical_distance};
use gaussperc_core::excursion::{excursion_set, exist_event, Adjacency, BoxSpec};
use gaussperc_core::field::sample_smooth_field;
use gaussperc_core::grid::Grid;
use gaussperc_core::kernel::{make_kernel, KernelKind};
use gaussperc_core::rng::RngState;

fn bench_field_synthesis(c: &mut Criterion) {
    let kernel = make_kernel(KernelKind::BargmannFock, 2, None, None).unwrap();
    let mut group = c.benchmark_group("field-synthesis");
    for &half in &[5.0, 10.0, 20.0] {
        let grid = Grid::covering(&[0.0, 0.0], half, 0.25).unwrap();
        group.bench_function(format!("bf-d2-half{half}"), |b| {
            let mut trial = 0u64;
            b.iter(|| {
                trial += 1;
                sample_smooth_field(&grid, &kernel, &RngState::trial(1, 0, trial)).unwrap()
            });
        });
    }
    group.finish();
}

fn bench_labeling(c: &mut Criterion) {
    let kernel = make_kernel(KernelKind::BargmannFock, 2, None, None).unwrap();
    let grid = Grid::covering(&[0.0, 0.0], 20.0, 0.25).unwrap();
    let field = sample_smooth_field(&grid, &kernel, &RngState::new(2, 0)).unwrap();
    let spec = BoxSpec::new(vec![0.0, 0.0], 15.0, 0.25).unwrap();
    let mut group = c.benchmark_group("labeling");
    for adj in [Adjacency::Face, Adjacency::Star] {
        group.bench_function(format!("label-{adj:?}"), |b| {
            b.iter(|| excursion_set(&field, 0.0, adj));
        });
    }
    group.bench_function("exist-event", |b| {
        b.iter_batched(
            || excursion_set(&field, 0.0, Adjacency::Face),
            |set| exist_event(&set, &spec),
            BatchSize::SmallInput,
        );
    });
    group.finish();
}

fn bench_shortest_path(c: &mut Criterion) {
    let kernel = make_kernel(KernelKind::BargmannFock, 2, None, None).unwrap();
    let grid = Grid::covering(&[0.0, 0.0], 20.0, 0.25).unwrap();
    // supercritical level so endpoints usually connect
    let field = sample_smooth_field(&grid, &kernel, &RngState::new(3, 0)).unwrap();
    let set = excursion_set(&field, 0.5, Adjacency::Face);
    let a = grid.clamped_cell(&[-18.0, 0.0]);
    let b_ = grid.clamped_cell(&[18.0, 0.0]);
    let mut group = c.benchmark_group("shortest-path");
    group.bench_function("dijkstra-40x40", |b| {
        b.iter(|| chemical_distance(&set, &a, &b_));
    });
    let giant = (0..set.components.len() as u32)
        .max_by_key(|&c| set.components[c as usize].cells)
        .unwrap();
    group.bench_function("chem-diameter-40x40", |b| {
        b.iter(|| chemical_diameter(&set, giant));
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_field_synthesis,
    bench_labeling,
    bench_shortest_path
);
criterion_main!(benches);
