use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use stochetd::{
    etd_coefficient_set, generate_paths, ContourConfig, EtdScheme, Increment, Integrator, ModelConfig, SchemeId,
};

fn one_step(c: &mut Criterion) {
    let model = ModelConfig::kdv_travelling_wave(256, 64.0, 1.0).build().unwrap();
    let dt = 1e-5;
    let inc = Increment::new(dt, vec![1e-3]).unwrap();
    let mut group = c.benchmark_group("kdv256_step");
    for scheme in ["ssp22", "srk4", "esspifsrk22", "ifsrk4", "setdrk2", "setdrk4"] {
        let id: SchemeId = scheme.parse().unwrap();
        let integ = Integrator::new(&model.problem, id, dt, &ContourConfig::default(), None).unwrap();
        group.bench_function(scheme, |b| {
            b.iter(|| integ.step(&model.problem, 0.0, black_box(&model.u0), &inc).unwrap())
        });
    }
    group.finish();
}

fn coefficient_setup(c: &mut Criterion) {
    let mut group = c.benchmark_group("setdrk4_coefficients");
    for n_x in [128, 512] {
        let model = ModelConfig::kdv_travelling_wave(n_x, 64.0, 0.0).build().unwrap();
        let eig = model.problem.linear_part().unwrap().to_vec();
        group.bench_with_input(BenchmarkId::from_parameter(n_x), &eig, |b, eig| {
            b.iter(|| etd_coefficient_set(EtdScheme::Setdrk4, eig, 1e-4, &ContourConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn brownian_paths(c: &mut Criterion) {
    c.bench_function("paths_3x65536", |b| b.iter(|| generate_paths(black_box(1), 0, 3, 1 << 16, 1e-6).unwrap()));
}

criterion_group!(benches, one_step, coefficient_setup, brownian_paths);
criterion_main!(benches);
