use powerforest::cart::Node;
use powerforest::{best_split, fit_tree, Matrix, RegressionTree, TreeParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sse(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|y| (y - m) * (y - m)).sum()
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = (lo + hi) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Enumerates every feature and midpoint, partitions the rows and scores
/// the split from scratch.
fn brute_force(x: &Matrix, y: &[f64], features: &[usize]) -> Option<(usize, f64, f64)> {
    let parent = sse(y);
    let mut best: Option<(usize, f64, f64)> = None;
    for &f in features {
        let mut values = x.column(f);
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = midpoint(w[0], w[1]);
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for (i, &v) in y.iter().enumerate() {
                if x.get(i, f) <= t {
                    left.push(v);
                } else {
                    right.push(v);
                }
            }
            let red = parent - sse(&left) - sse(&right);
            let better = match best {
                None => red > 1e-12 * parent.max(1.0),
                Some((_, _, b)) => red > b + 1e-12 * parent.max(1.0),
            };
            if better {
                best = Some((f, t, red));
            }
        }
    }
    best
}

fn instance(rng: &mut ChaCha8Rng, n: usize, p: usize, coarse: bool) -> (Matrix, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..p)
                .map(|_| {
                    let v: f64 = rng.random_range(-3.0..3.0);
                    if coarse {
                        (v * 2.0).round() / 2.0
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let y = rows
        .iter()
        .map(|r| r[0].sin() + 0.5 * r[p - 1] * r[0] + rng.random_range(-0.5..0.5))
        .collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn assert_matches_oracle(x: &Matrix, y: &[f64]) {
    let features: Vec<usize> = (0..x.cols()).collect();
    let got = best_split(x, y, &features);
    let want = brute_force(x, y, &features);
    match (got, want) {
        (None, None) => {}
        (Some(s), Some((f, t, red))) => {
            assert_eq!(s.feature, f);
            assert_eq!(s.threshold, t);
            assert!((s.sse_reduction - red).abs() <= 1e-9 * red.max(1.0));
            assert_eq!(s.left_count + s.right_count, y.len());
        }
        (g, w) => panic!("split {g:?} vs oracle {w:?}"),
    }
}

#[test]
fn best_split_matches_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..200 {
        let n = rng.random_range(2..=200);
        let p = rng.random_range(1..=5);
        let (x, y) = instance(&mut rng, n, p, k % 3 == 0);
        assert_matches_oracle(&x, &y);
    }
}

#[test]
fn random_30_by_3_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let (x, y) = instance(&mut rng, 30, 3, false);
    assert_matches_oracle(&x, &y);
}

fn training_rmse(tree: &RegressionTree, x: &Matrix, y: &[f64]) -> f64 {
    let sq: f64 = (0..y.len())
        .map(|i| (tree.predict(x.row(i)).unwrap() - y[i]).powi(2))
        .sum();
    (sq / y.len() as f64).sqrt()
}

#[test]
fn full_depth_tree_interpolates_distinct_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..50 {
        let n = rng.random_range(2..=150);
        let p = rng.random_range(1..=5);
        let (x, y) = instance(&mut rng, n, p, false);
        let tree = fit_tree(&x, &y, &TreeParams::exhaustive(2, p), 0).unwrap();
        assert_eq!(training_rmse(&tree, &x, &y), 0.0);
    }
}

/// Per-leaf training rows, by routing every row.
fn leaf_members(tree: &RegressionTree, x: &Matrix) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); tree.nodes().len()];
    for i in 0..x.rows() {
        members[tree.leaf_index(x.row(i))].push(i);
    }
    members
}

fn check_structure(tree: &RegressionTree, x: &Matrix, y: &[f64], min_node: usize) {
    let members = leaf_members(tree, x);
    let mut total = 0;
    let mut leaf_sse = 0.0;
    for (id, node) in tree.nodes().iter().enumerate() {
        match *node {
            Node::Leaf { prediction, count } => {
                assert_eq!(members[id].len(), count);
                total += count;
                let v: Vec<f64> = members[id].iter().map(|&i| y[i]).collect();
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                assert!((prediction - mean).abs() <= 1e-12 * mean.abs().max(1.0));
                leaf_sse += sse(&v);
            }
            Node::Split {
                count,
                left,
                right,
                sse_reduction,
                ..
            } => {
                assert!(count >= min_node);
                assert!(sse_reduction >= 0.0);
                assert_eq!(
                    tree.nodes()[left].count() + tree.nodes()[right].count(),
                    count
                );
            }
        }
    }
    assert_eq!(total, y.len());
    let tally: f64 = tree.importance().iter().sum();
    let drop = sse(y) - leaf_sse;
    assert!((tally - drop).abs() <= 1e-9 * drop.max(1e-12));
    assert!(tree.importance().iter().all(|&v| v >= 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_optimality(seed in any::<u64>(), n in 2usize..120, p in 1usize..=5, coarse in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = instance(&mut rng, n, p, coarse);
        assert_matches_oracle(&x, &y);
    }

    #[test]
    fn smaller_min_node_never_raises_training_sse(
        seed in any::<u64>(), n in 20usize..150, p in 1usize..=4, a in 2usize..30, b in 2usize..30,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = instance(&mut rng, n, p, seed % 2 == 0);
        let (lo, hi) = (a.min(b), a.max(b));
        let fine = fit_tree(&x, &y, &TreeParams::exhaustive(lo, p), 0).unwrap();
        let coarse = fit_tree(&x, &y, &TreeParams::exhaustive(hi, p), 0).unwrap();
        let (f, c) = (training_rmse(&fine, &x, &y), training_rmse(&coarse, &x, &y));
        prop_assert!(f <= c + 1e-12, "min-node {lo}: {f}, min-node {hi}: {c}");
    }

    #[test]
    fn tree_structure_invariants(
        seed in any::<u64>(), n in 2usize..150, p in 1usize..=5, min_node in 2usize..20, mtry_frac in 0.0f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = instance(&mut rng, n, p, seed % 2 == 1);
        let mtry = 1 + ((p - 1) as f64 * mtry_frac) as usize;
        let params = TreeParams { min_node_size: min_node, features_per_split: mtry, max_depth: None };
        let tree = fit_tree(&x, &y, &params, seed).unwrap();
        check_structure(&tree, &x, &y, min_node);
        prop_assert_eq!(&tree, &fit_tree(&x, &y, &params, seed).unwrap());
    }
}

#[test]
fn json_layout_matches_golden_file() {
    let x = Matrix::from_columns(&[
        vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
    ])
    .unwrap();
    let y = [0.0, 0.5, 1.0, 4.0, 4.5, 8.0];
    let tree = fit_tree(&x, &y, &TreeParams::exhaustive(3, 2), 0).unwrap();
    let golden = include_str!("data/tree.json");
    assert_eq!(tree.to_json().unwrap().trim_end(), golden.trim_end());
    assert_eq!(RegressionTree::from_json(golden).unwrap(), tree);
}
