use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use flowlab::algebra::{self, c, CMatrix};
use flowlab::charforms::top_chern_form;
use flowlab::flows::{unitary_tanh_flow, unitary_tanh_flow_spectral};
use flowlab::integrate::{integrate_form, Scheme};
use flowlab::models::{polar_plane, tau_perp_bundle};

/// A fixed unitary `exp(i H)` with `H` Hermitian and dense.
fn unitary(n: usize) -> CMatrix {
    let h = CMatrix::from_fn(n, n, |i, j| c(((i + 2 * j) as f64).sin(), ((3 * i + j) as f64).cos()));
    algebra::expm(&algebra::symmetrize(&h).map(|z| z * c(0.0, 1.0)))
}

fn matrix_kernels(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("matrix");
    for n in [2, 4, 8] {
        let u = unitary(n);
        let h = algebra::symmetrize(&u);
        g.bench_with_input(BenchmarkId::new("expm", n), &h, |b, h| b.iter(|| algebra::expm(black_box(h))));
        g.bench_with_input(BenchmarkId::new("hermitian_eigen", n), &h, |b, h| b.iter(|| algebra::hermitian_eigen(black_box(h)).unwrap()));
        g.bench_with_input(BenchmarkId::new("tanh_flow_stepped", n), &u, |b, u| b.iter(|| unitary_tanh_flow(black_box(3.0), u).unwrap()));
        g.bench_with_input(BenchmarkId::new("tanh_flow_spectral", n), &u, |b, u| {
            b.iter(|| unitary_tanh_flow_spectral(black_box(3.0), u).unwrap())
        });
    }
    g.finish();
}

fn integration_kernels(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("integrate");
    g.sample_size(10);
    let form = top_chern_form(&tau_perp_bundle(1).unwrap());
    let plane = polar_plane(1);
    for points in [16, 32] {
        g.bench_with_input(BenchmarkId::new("c1_over_CP1", points), &points, |b, &p| {
            b.iter(|| integrate_form(&plane, &form, &Scheme::gauss(p)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, matrix_kernels, integration_kernels);
criterion_main!(benches);
