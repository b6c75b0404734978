use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use shear_bench::{lattice_points, perturbed_couette};
use shear_core::eval::{eval_at_points, RefinedInterpolator};
use shear_core::{euler, velocity_from_vorticity, LinearizedEuler, SpectralField};

fn transforms(c: &mut Criterion) {
    let mut g = c.benchmark_group("transform_round_trip");
    for n in [64usize, 128, 256] {
        let (_, s) = perturbed_couette(n, n / 4, 4, 1e-2);
        g.bench_with_input(BenchmarkId::from_parameter(n), &s.omega, |b, w| {
            b.iter(|| {
                let v = w.to_values();
                SpectralField::from_values(w.grid(), black_box(&v)).unwrap()
            })
        });
    }
    g.finish();
}

fn biot_savart(c: &mut Criterion) {
    let (_, s) = perturbed_couette(128, 128, 4, 1e-2);
    c.bench_function("velocity_from_vorticity_128x512", |b| {
        b.iter(|| velocity_from_vorticity(black_box(&s.omega), s.mean).unwrap())
    });
}

fn rhs(c: &mut Criterion) {
    let mut g = c.benchmark_group("rhs_128x512");
    let (profile, s) = perturbed_couette(128, 128, 4, 1e-2);
    g.bench_function("euler", |b| b.iter(|| euler::rhs(black_box(&s)).unwrap()));
    let lin = LinearizedEuler::new(&profile, s.grid()).unwrap();
    g.bench_function("linearized", |b| {
        b.iter(|| lin.rhs(black_box(&s.omega)).unwrap())
    });
    g.bench_function("rk4_step", |b| {
        b.iter(|| euler::step(black_box(&s), 1e-3, 0.5).unwrap())
    });
    g.finish();
}

fn off_grid(c: &mut Criterion) {
    let mut g = c.benchmark_group("off_grid_eval_32x128");
    let (_, s) = perturbed_couette(32, 32, 4, 1e-2);
    let pts = lattice_points(s.grid(), 16);
    g.bench_function("exact_256_points", |b| {
        b.iter(|| eval_at_points(black_box(&s.omega), &pts))
    });
    let interp = RefinedInterpolator::new(&s.omega, 2).unwrap();
    g.bench_function("refined_256_points", |b| {
        b.iter(|| interp.eval_points(black_box(&pts)))
    });
    g.finish();
}

criterion_group!(benches, transforms, biot_savart, rhs, off_grid);
criterion_main!(benches);
