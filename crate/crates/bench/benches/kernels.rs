use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gplab_bench::{cloud, scaffold, subspaces};
use gplab_core::construction::{event_indicator, local_regions};
use gplab_core::intrinsic::{exact_measures, kubota_estimate, local_functional};
use gplab_core::sampling::{gaussian_cloud, RandomStream};
use gplab_core::{convex_hull, PointCloud};
use std::hint::black_box;

fn hulls(c: &mut Criterion) {
    let mut g = c.benchmark_group("hull");
    for (n, d) in [(10_000, 2), (1_000_000, 2), (1_000, 3), (10_000, 3), (1_000, 4)] {
        let pts = cloud(n, d);
        g.bench_with_input(BenchmarkId::new(format!("d{d}"), n), &pts, |b, pts| {
            b.iter(|| convex_hull(black_box(pts)).unwrap())
        });
    }
    g.finish();
}

fn measures(c: &mut Criterion) {
    let pts = cloud(10_000, 3);
    c.bench_function("exact_measures/d3/10000", |b| b.iter(|| exact_measures(black_box(&pts)).unwrap()));
    let mut g = c.benchmark_group("kubota");
    for (d, ell) in [(3, 1), (4, 2)] {
        let pts = cloud(1_000, d);
        let subs = subspaces(d, ell, 2000);
        g.bench_function(format!("d{d}/l{ell}/2000"), |b| {
            b.iter(|| kubota_estimate(black_box(&pts), ell, &subs).unwrap())
        });
    }
    g.finish();
}

fn local(c: &mut Criterion) {
    let s = scaffold(10_000, 2);
    let site = &s.sites[0];
    let regions = local_regions(site, 1).unwrap();
    let f = PointCloud::from_points(2, &site.vertices).unwrap();
    let subs = subspaces(2, 1, 500);
    c.bench_function("local_functional/d2/l1/500", |b| {
        b.iter(|| local_functional(black_box(&site.y0), &f, &regions.cone, 1, &subs).unwrap())
    });
    let mut rng = RandomStream::new(3, 0);
    let clouds: Vec<PointCloud> = (0..16).map(|_| gaussian_cloud(10_000, 2, &mut rng)).collect();
    c.bench_function("event_indicator/d2/10000", |b| {
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % clouds.len();
            event_indicator(black_box(&clouds[i]), site)
        })
    });
}

criterion_group!(benches, hulls, measures, local);
criterion_main!(benches);
