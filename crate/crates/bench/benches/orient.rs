use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pathorient::geom::{Point, Vector};
use pathorient::ransac::detect_planes;
use pathorient::ray::{trace_paths, Side};
use pathorient::rng::{Domain, KeyedRng};
use pathorient_bench::single_room;

fn bvh(c: &mut Criterion) {
    let f = single_room(2.0);
    let mut rng = KeyedRng::new(1, Domain::Test, &[]);
    let rays: Vec<(Point, Vector)> = (0..1024)
        .map(|_| {
            let o = Point::new(0.5 + 5.0 * rng.next_f64(), 0.5 + 4.0 * rng.next_f64(), 0.5 + 2.0 * rng.next_f64());
            let d = Vector::new(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()).normalize();
            (o, d)
        })
        .collect();
    c.bench_function("bvh_1024_rays", |b| {
        b.iter(|| {
            rays.iter()
                .filter(|(o, d)| f.scene.intersect(o, d, 1e-6).is_some())
                .count()
        })
    });
}

fn trace(c: &mut Criterion) {
    let f = single_room(2.0);
    let patch = &f.patches.patches[f.patches.patches.len() / 2];
    c.bench_function("trace_patch_both_sides", |b| {
        b.iter(|| {
            let front = trace_paths(&f.scene, black_box(patch), Side::Front, &f.cfg.trace);
            let back = trace_paths(&f.scene, black_box(patch), Side::Back, &f.cfg.trace);
            (front, back)
        })
    });
}

fn ransac(c: &mut Criterion) {
    let f = single_room(2.0);
    let mut g = c.benchmark_group("ransac");
    g.sample_size(10);
    g.bench_function("single_room", |b| b.iter(|| detect_planes(black_box(&f.cloud), &f.cfg.detection).unwrap()));
    g.finish();
}

criterion_group!(benches, bvh, trace, ransac);
criterion_main!(benches);
