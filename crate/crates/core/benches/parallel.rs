use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mdenoise_core::datagen::{add_gaussian_noise, ellipse_grid, sample_ellipse};
use mdenoise_core::geometry::SphereNet;
use mdenoise_core::oracle::OracleParams;
use mdenoise_core::projection::{
    ExactSupport, StatisticalSupport, SupportTable, DEFAULT_FAILURE_TOLERANCE,
};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let full = rayon::current_num_threads();
    [("1-thread".to_string(), 1), (format!("full-{full}"), full)]
        .into_iter()
        .map(|(label, n)| {
            (
                label,
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .unwrap(),
            )
        })
        .collect()
}

fn support_table(c: &mut Criterion) {
    let mut group = c.benchmark_group("support_table");
    group.sample_size(10);

    let exact = ExactSupport {
        vertices: ellipse_grid(2000),
    };
    let sigma = 0.2;
    let stat = StatisticalSupport {
        block: add_gaussian_noise(&sample_ellipse(20_000, 1), sigma, 2).unwrap(),
        params: OracleParams::derive(sigma, 0.15, 1, 0.2).unwrap(),
    };

    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::new("exact", &label), |b| {
            b.iter(|| {
                pool.install(|| {
                    let net = SphereNet::build(2, 0.02).unwrap();
                    SupportTable::build(net, &exact, DEFAULT_FAILURE_TOLERANCE).unwrap()
                })
            })
        });
        group.bench_function(BenchmarkId::new("statistical", &label), |b| {
            b.iter(|| {
                pool.install(|| {
                    let net = SphereNet::build(2, 0.05).unwrap();
                    SupportTable::build(net, &stat, DEFAULT_FAILURE_TOLERANCE).unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, support_table);
criterion_main!(benches);
