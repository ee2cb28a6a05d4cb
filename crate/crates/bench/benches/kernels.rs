use criterion::{black_box, criterion_group, criterion_main, Criterion};
use mcx_bench::{ellipse_cloud, sample, shear_kick, typical_iet};
use mcx_core::bowen::{bk_series, bk_series_nested};
use mcx_core::covering::{complexity_curve_on, exact_cover_count, greedy_cover_matrix, CurveOptions, PairTable};
use mcx_core::exponents::min_enclosing_sides;
use mcx_core::{Gauge, Point, SystemDescriptor};

fn covering(c: &mut Criterion) {
    let iet = typical_iet();
    let pts = sample(&iet, 5000);
    c.bench_function("pair_table iet m=5000 n=256", |b| {
        b.iter(|| PairTable::build(&iet, black_box(&pts), 0.01, 4, 256, usize::MAX).unwrap())
    });
    let grid: Vec<usize> = (2..=8).map(|k| 1 << k).collect();
    c.bench_function("complexity_curve iet m=5000", |b| {
        b.iter(|| {
            complexity_curve_on(&iet, black_box(&pts), &grid, 0.01, 0.25, Gauge::Log2, &CurveOptions::default())
                .unwrap()
        })
    });
    let m = 18;
    let matrix: Vec<Vec<bool>> = (0..m).map(|i| (0..m).map(|j| (i * 7 + j * 3) % 5 == 0 || i == j).collect()).collect();
    c.bench_function("greedy_cover_matrix m=18", |b| b.iter(|| greedy_cover_matrix(black_box(&matrix), 0.9).unwrap()));
    c.bench_function("exact_cover_count m=18", |b| b.iter(|| exact_cover_count(black_box(&matrix), 0.9).unwrap()));
}

fn measures(c: &mut Criterion) {
    let doubling = SystemDescriptor::doubling();
    let grid: Vec<usize> = (5..=15).collect();
    c.bench_function("bk_series doubling m=100k", |b| {
        b.iter(|| bk_series(&doubling, &Point::new1(0.3), 1e-3, Gauge::Identity, &grid, 100_000, 1).unwrap())
    });
    let cp = shear_kick();
    let grid: Vec<usize> = vec![16, 23, 32, 45, 64, 91, 128, 181, 256, 362, 512];
    let mut g = c.benchmark_group("nested");
    g.sample_size(10);
    g.bench_function("bk_series_nested shear_kick m=20k", |b| {
        b.iter(|| bk_series_nested(&cp, &Point::new2(0.3, 0.58), 0.05, Gauge::Log2, &grid, 20_000, 1).unwrap())
    });
    g.finish();
}

fn geometry(c: &mut Criterion) {
    let cloud = ellipse_cloud(10_000);
    c.bench_function("min_enclosing_sides k=10000", |b| b.iter(|| min_enclosing_sides(black_box(&cloud))));
}

criterion_group!(benches, covering, measures, geometry);
criterion_main!(benches);
