use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use powerforest::{best_split, fit_tree, ForestModel, Hyperparameters, Matrix, TreeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(n: usize, p: usize) -> (Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|r| r[0] * r[3] - 0.6 * r[p - 1] + 0.1 * rng.random_range(-1.0..1.0))
        .collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn split_search(c: &mut Criterion) {
    let mut g = c.benchmark_group("best_split");
    for n in [500, 2600] {
        let (x, y) = data(n, 12);
        let features: Vec<usize> = (0..12).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| best_split(black_box(&x), black_box(&y), &features))
        });
    }
    g.finish();
}

fn single_tree(c: &mut Criterion) {
    let (x, y) = data(2600, 12);
    let mut g = c.benchmark_group("fit_tree");
    for min_node in [5, 40] {
        let params = TreeParams::exhaustive(min_node, 12);
        g.bench_with_input(BenchmarkId::from_parameter(min_node), &min_node, |b, _| {
            b.iter(|| fit_tree(black_box(&x), black_box(&y), &params, 0).unwrap())
        });
    }
    g.finish();
}

fn forest(c: &mut Criterion) {
    let (x, y) = data(2600, 12);
    let h = Hyperparameters {
        n_trees: 100,
        min_node_size: 10,
        ..Default::default()
    };
    let mut g = c.benchmark_group("fit_forest");
    g.sample_size(10);
    g.bench_function("100_trees", |b| {
        b.iter(|| ForestModel::fit(black_box(&x), black_box(&y), &h).unwrap())
    });
    g.finish();
}

criterion_group!(benches, split_search, single_tree, forest);
criterion_main!(benches);
