use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use kinred::ansatz::params_from_moments_near;
use kinred::{reduced, reference, TangentProjector};
use kinred_bench::{demo, demo_kinetic, demo_reduced, inversion_cases};

fn inversion(c: &mut Criterion) {
    let grid = demo().grid().unwrap();
    let cases = inversion_cases(&grid);
    c.bench_function("moment inversion, order 2, warm start", |b| {
        b.iter(|| {
            for (p, m) in &cases {
                black_box(params_from_moments_near(2, m, &grid, Some(p)).unwrap());
            }
        })
    });
    c.bench_function("moment inversion, order 2, cold start", |b| {
        b.iter(|| {
            for (_, m) in &cases {
                black_box(params_from_moments_near(2, m, &grid, None).unwrap());
            }
        })
    });
}

fn projection(c: &mut Criterion) {
    let grid = demo().grid().unwrap();
    let (p, _) = inversion_cases(&grid).swap_remove(1);
    let h: Vec<f64> = grid.nodes().iter().map(|x| (-x * x).exp() * x.sin()).collect();
    c.bench_function("tangent projector build", |b| b.iter(|| black_box(TangentProjector::at(&p, &grid).unwrap())));
    let proj = TangentProjector::at(&p, &grid).unwrap();
    c.bench_function("tangent projector apply", |b| b.iter(|| black_box(proj.apply(&grid, &h))));
}

fn steps(c: &mut Criterion) {
    let config = demo();
    let model = config.model().unwrap();
    let red = demo_reduced();
    let kin = demo_kinetic();
    let mut group = c.benchmark_group("demo step");
    group.sample_size(10);
    group.bench_function("reduced SSP-RK2", |b| {
        b.iter(|| black_box(reduced::step(&red, &model, config.time.cfl).unwrap()))
    });
    group.bench_function("reference Strang", |b| {
        b.iter(|| black_box(reference::strang_step(&kin, Some(&model), 1e-3).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, inversion, projection, steps);
criterion_main!(benches);
