use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use diffrep_bench::sine_problem;
use diffrep_core::{evaluate_derivative, gauss_laguerre_rule, Method, TimeGrid};

fn steps(c: &mut Criterion) {
    let problem = sine_problem(0.5);
    let rule = gauss_laguerre_rule(32).unwrap();
    let mut group = c.benchmark_group("evaluate/steps");
    for n in [1_000usize, 10_000, 100_000] {
        let grid = TimeGrid::uniform(0.0, 1.0, n).unwrap();
        group.throughput(Throughput::Elements(n as u64));
        for method in [Method::BackwardEuler, Method::Trapezoidal] {
            group.bench_with_input(BenchmarkId::new(method.to_string(), n), &grid, |b, grid| {
                b.iter(|| {
                    evaluate_derivative(&problem, &rule, black_box(grid), method, None).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn nodes(c: &mut Criterion) {
    let problem = sine_problem(0.5);
    let grid = TimeGrid::uniform(0.0, 1.0, 10_000).unwrap();
    let mut group = c.benchmark_group("evaluate/nodes");
    for k in [8usize, 32, 128] {
        let rule = gauss_laguerre_rule(k).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(k), &rule, |b, rule| {
            b.iter(|| {
                evaluate_derivative(
                    &problem,
                    black_box(rule),
                    &grid,
                    Method::BackwardEuler,
                    None,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, steps, nodes);
criterion_main!(benches);
