use criterion::{black_box, criterion_group, criterion_main, Criterion};

use ifs_cuntz::measure::{chaos_game, hutchinson_fixed_point};
use ifs_cuntz::rational::rat;
use ifs_cuntz::{cuntz, l2};
use ifs_cuntz::{IfsSystem, L2Vector, Measure, PermutativeRep, RepVector, C64};

fn bench_hutchinson(c: &mut Criterion) {
    let sys = IfsSystem::dyadic();
    let weights = [rat(1, 3), rat(2, 3)];
    c.bench_function("hutchinson fixed point, depth 8", |b| {
        b.iter(|| hutchinson_fixed_point(black_box(&sys), &weights, 8).unwrap())
    });
}

fn bench_relation_suite(c: &mut Criterion) {
    let sys = IfsSystem::cantor();
    let mu = Measure::bernoulli(sys.alphabet(), vec![rat(1, 2), rat(1, 2)]).unwrap();
    let base = mu.at_depth(5).unwrap();
    let values = sys
        .alphabet()
        .words(5)
        .into_iter()
        .enumerate()
        .map(|(k, w)| (w, C64::new(1.0 + k as f64 / 8.0, (k % 5) as f64 / 4.0)))
        .collect();
    let phi = L2Vector::new(base, values, vec![]).unwrap();
    c.bench_function("relation suite on one depth-5 vector", |b| {
        b.iter(|| {
            l2::verify_l2_relations(black_box(&sys), std::slice::from_ref(&phi), 1e-12).unwrap()
        })
    });
}

fn bench_vector_measure(c: &mut Criterion) {
    let rep = PermutativeRep::torus();
    let f = RepVector::from_coeffs(
        (-32i64..=32)
            .map(|n| (n, C64::new(1.0 / (n as f64 + 34.0), n.rem_euclid(3) as f64 / 4.0)))
            .collect(),
    );
    c.bench_function("vector measure, 65 indices, depth 10", |b| {
        b.iter(|| cuntz::vector_measure(black_box(&rep), &f, 10).unwrap())
    });
}

fn bench_chaos_game(c: &mut Criterion) {
    let sys = IfsSystem::dyadic();
    let weights = [rat(1, 2), rat(1, 2)];
    let mut group = c.benchmark_group("sampling");
    group.sample_size(10);
    group.bench_function("chaos game, 100k samples, depth 3", |b| {
        b.iter(|| chaos_game(black_box(&sys), &weights, 100_000, 7, 3).unwrap())
    });
    group.finish();
}

criterion_group!(
    pipelines,
    bench_hutchinson,
    bench_relation_suite,
    bench_vector_measure,
    bench_chaos_game
);
criterion_main!(pipelines);
