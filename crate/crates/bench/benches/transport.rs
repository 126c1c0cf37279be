use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gqlab::boson_quant::bergman_transport_quadrature;
use gqlab::grassmann::oriented_pfaffian;
use gqlab_bench::{boson_path, fermion_path, skew};

fn pfaffian(c: &mut Criterion) {
    let mut g = c.benchmark_group("pfaffian");
    for d in [4, 8, 16] {
        let a = skew(d);
        g.bench_with_input(BenchmarkId::from_parameter(d), &a, |bch, a| bch.iter(|| oriented_pfaffian(black_box(a)).unwrap()));
    }
    g.finish();
}

fn fermion(c: &mut Criterion) {
    let mut g = c.benchmark_group("fermion-transport");
    g.sample_size(10);
    for n in [2, 4] {
        let (ctx, path) = fermion_path(n, 0.8).unwrap();
        g.bench_function(BenchmarkId::new("bogoliubov", n), |bch| bch.iter(|| ctx.transport_bogoliubov(black_box(&path)).unwrap()));
        g.bench_function(BenchmarkId::new("ode-200", n), |bch| bch.iter(|| ctx.transport_ode_operator(black_box(&path), 200).unwrap()));
    }
    g.finish();
}

fn boson(c: &mut Criterion) {
    let mut g = c.benchmark_group("boson-quadrature");
    g.sample_size(10);
    let (path, input) = boson_path(0.5).unwrap();
    let pts = vec![vec![0.2, -0.1], vec![-0.4, 0.3]];
    for nodes in [20, 40] {
        g.bench_with_input(BenchmarkId::from_parameter(nodes), &nodes, |bch, &m| {
            bch.iter(|| bergman_transport_quadrature(black_box(&path), &input, &pts, m).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, pfaffian, fermion, boson);
criterion_main!(benches);
