//! Bagged regression forests.
//!
//! Every tree draws its resample and its per-node feature subsets from
//! its own ChaCha stream, keyed by the master seed and the tree index.
//! A forest of `k` trees is therefore exactly the first `k` trees of any
//! larger forest with the same seed, and results do not depend on how
//! many worker threads did the fitting.

mod oob;
mod partial;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{fit_tree_rows, RegressionTree, TreeParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pipeline::DesignMatrix;

pub use oob::OobPredictions;
pub use partial::{GridAxis, PartialGrid, DEFAULT_GRID_POINTS};

pub const FOREST_FORMAT: &str = "powerforest-forest";
pub const FOREST_FORMAT_VERSION: u32 = 1;

/// Smallest training set accepted by [`ForestModel::fit`].
pub const MIN_FOREST_ROWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// `n` draws with replacement; about 36.8% of rows stay out of bag.
    #[default]
    Bootstrap,
    /// Exactly `round(2n/3)` distinct rows without replacement.
    Subsample,
}

impl FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bootstrap" => Ok(SamplingMode::Bootstrap),
            "subsample" => Ok(SamplingMode::Subsample),
            other => Err(Error::Config(format!("unknown sampling mode `{other}`"))),
        }
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMode::Bootstrap => "bootstrap",
            SamplingMode::Subsample => "subsample",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub n_trees: usize,
    pub min_node_size: usize,
    /// `None` means `max(1, p / 3)`.
    pub features_per_split: Option<usize>,
    pub sampling: SamplingMode,
    pub seed: u64,
    pub max_depth: Option<usize>,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            n_trees: 1000,
            min_node_size: 10,
            features_per_split: None,
            sampling: SamplingMode::Bootstrap,
            seed: 42,
            max_depth: None,
        }
    }
}

impl Hyperparameters {
    pub fn resolved_features_per_split(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_features / 3).max(1))
    }

    fn tree_params(&self, n_features: usize) -> TreeParams {
        TreeParams {
            min_node_size: self.min_node_size,
            features_per_split: self.resolved_features_per_split(n_features),
            max_depth: self.max_depth,
        }
    }
}

/// Random stream for tree `index`; independent of the forest size.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Rows that were drawn into one tree's resample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagMask(Vec<bool>);

impl BagMask {
    pub fn in_bag(&self, row: usize) -> bool {
        self.0[row]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn in_bag_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

impl Serialize for BagMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let bits: String = self.0.iter().map(|&b| if b { '1' } else { '0' }).collect();
        s.serialize_str(&bits)
    }
}

impl<'de> Deserialize<'de> for BagMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bits = String::deserialize(d)?;
        bits.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(serde::de::Error::custom("bag mask must be a 0/1 string")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(BagMask)
    }
}

/// Per-feature share of the total SSE reduction, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl ImportanceTable {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    /// Feature names from most to least important; ties keep column order.
    pub fn ranking(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]));
        idx.into_iter().map(|i| self.names[i].as_str()).collect()
    }
}

/// Writes labelled importance rows under a `label,<feature names>` header,
/// at full precision.
pub fn write_importance_csv<W: Write>(
    writer: W,
    label_header: &str,
    rows: &[(String, ImportanceTable)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if let Some((_, first)) = rows.first() {
        let mut header = vec![label_header.to_string()];
        header.extend(first.names.iter().cloned());
        w.write_record(&header)?;
    }
    for (label, table) in rows {
        let mut rec = vec![label.clone()];
        rec.extend(table.values.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    hyper: Hyperparameters,
    feature_names: Vec<String>,
    column_means: Vec<f64>,
    column_ranges: Vec<(f64, f64)>,
    n_train_rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_dates: Option<Vec<NaiveDate>>,
    trees: Vec<RegressionTree>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bags: Option<Vec<BagMask>>,
}

#[derive(Serialize, Deserialize)]
struct ForestDocument {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: ForestModel,
}

impl ForestModel {
    /// Fits on a design matrix; out-of-bag queries must use the same dates.
    pub fn fit_design(design: &DesignMatrix, hyper: &Hyperparameters) -> Result<Self> {
        let mut model = Self::fit_named(&design.x, &design.y, &design.feature_names, hyper)?;
        model.train_dates = Some(design.dates.clone());
        Ok(model)
    }

    /// Fits on raw features with names `x0, x1, ...`.
    pub fn fit(x: &Matrix, y: &[f64], hyper: &Hyperparameters) -> Result<Self> {
        let names: Vec<String> = (0..x.cols()).map(|j| format!("x{j}")).collect();
        Self::fit_named(x, y, &names, hyper)
    }

    fn fit_named(x: &Matrix, y: &[f64], names: &[String], hyper: &Hyperparameters) -> Result<Self> {
        let n = y.len();
        if x.rows() != n || names.len() != x.cols() {
            return Err(Error::InvalidInput(format!(
                "{} rows, {} targets, {} columns, {} names",
                x.rows(),
                n,
                x.cols(),
                names.len()
            )));
        }
        if n < MIN_FOREST_ROWS {
            return Err(Error::InsufficientData {
                what: "forest training rows".into(),
                needed: MIN_FOREST_ROWS,
                got: n,
            });
        }
        if hyper.n_trees == 0 {
            return Err(Error::InvalidInput("forest needs at least one tree".into()));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite training data".into()));
        }
        if y.iter().all(|&v| v == y[0]) {
            log::warn!("constant target: every tree is a single leaf");
        }
        let params = hyper.tree_params(x.cols());
        let grown: Vec<(RegressionTree, BagMask)> = (0..hyper.n_trees)
            .into_par_iter()
            .map(|t| grow_one(x, y, &params, hyper.sampling, hyper.seed, t))
            .collect::<Result<_>>()?;
        let (trees, bags) = grown.into_iter().unzip();
        Ok(ForestModel {
            hyper: *hyper,
            feature_names: names.to_vec(),
            column_means: x.column_means(),
            column_ranges: x.column_ranges(),
            n_train_rows: n,
            train_dates: None,
            trees,
            bags: Some(bags),
        })
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown feature `{name}` (valid: {})",
                    self.feature_names.join(", ")
                ))
            })
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub fn column_ranges(&self) -> &[(f64, f64)] {
        &self.column_ranges
    }

    pub fn bags(&self) -> Option<&[BagMask]> {
        self.bags.as_deref()
    }

    /// The sub-forest made of the first `k` trees.
    pub fn truncated(&self, k: usize) -> Result<ForestModel> {
        if k == 0 || k > self.trees.len() {
            return Err(Error::InvalidInput(format!(
                "cannot keep {k} of {} trees",
                self.trees.len()
            )));
        }
        let mut m = self.clone();
        m.trees.truncate(k);
        if let Some(b) = m.bags.as_mut() {
            b.truncate(k);
        }
        m.hyper.n_trees = k;
        Ok(m)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::InvalidInput(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_unchecked(x)).sum();
        sum / self.trees.len() as f64
    }

    /// Predictions for every row of `x`.
    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features() {
            return Err(Error::InvalidInput(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.cols()
            )));
        }
        if !x.is_finite() {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok((0..x.rows())
            .into_par_iter()
            .map(|i| self.predict_unchecked(x.row(i)))
            .collect())
    }

    /// Impurity importance: per-feature SSE reductions summed over all
    /// trees and divided by the grand total.
    pub fn importance(&self) -> Result<ImportanceTable> {
        let mut totals = vec![0.0; self.n_features()];
        for tree in &self.trees {
            for (t, v) in totals.iter_mut().zip(tree.importance()) {
                *t += v;
            }
        }
        let grand: f64 = totals.iter().sum();
        if !(grand > 0.0) {
            return Err(Error::NoSplits(
                "every tree is a single leaf; importance is undefined".into(),
            ));
        }
        Ok(ImportanceTable {
            names: self.feature_names.clone(),
            values: totals.into_iter().map(|t| t / grand).collect(),
        })
    }

    /// Versioned JSON bundle. Bag masks are needed for later out-of-bag
    /// queries but may be dropped to save space.
    pub fn to_json(&self, include_bags: bool) -> Result<String> {
        let mut model = self.clone();
        if !include_bags {
            model.bags = None;
        }
        let doc = ForestDocument {
            format: FOREST_FORMAT.into(),
            version: FOREST_FORMAT_VERSION,
            model,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ForestDocument = serde_json::from_str(text)?;
        if doc.format != FOREST_FORMAT || doc.version != FOREST_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported forest format {} v{}",
                doc.format, doc.version
            )));
        }
        let m = doc.model;
        let p = m.feature_names.len();
        if m.trees.is_empty()
            || m.column_means.len() != p
            || m.column_ranges.len() != p
            || m.trees.iter().any(|t| t.n_features() != p)
        {
            return Err(Error::InvalidInput("inconsistent forest bundle".into()));
        }
        for t in &m.trees {
            t.validate()?;
        }
        if let Some(b) = &m.bags {
            if b.len() != m.trees.len() || b.iter().any(|mask| mask.len() != m.n_train_rows) {
                return Err(Error::InvalidInput("bag masks do not match trees".into()));
            }
        }
        Ok(m)
    }
}

fn grow_one(
    x: &Matrix,
    y: &[f64],
    params: &TreeParams,
    sampling: SamplingMode,
    seed: u64,
    index: usize,
) -> Result<(RegressionTree, BagMask)> {
    let n = y.len();
    let mut rng = tree_rng(seed, index);
    let mut rows: Vec<usize> = match sampling {
        SamplingMode::Bootstrap => (0..n).map(|_| rng.random_range(0..n)).collect(),
        SamplingMode::Subsample => {
            let k = (2 * n + 1) / 3;
            let mut v = index::sample(&mut rng, n, k).into_vec();
            v.sort_unstable();
            v
        }
    };
    let mut mask = vec![false; n];
    for &r in &rows {
        mask[r] = true;
    }
    let tree = fit_tree_rows(x, y, &mut rows, params, &mut rng)?;
    Ok((tree, BagMask(mask)))
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y = rows
            .iter()
            .map(|r| {
                2.0 * r[0] + if r[1] > 0.0 { 1.0 } else { 0.0 } + 0.1 * rng.random_range(-1.0..1.0)
            })
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    fn hyper(n_trees: usize) -> Hyperparameters {
        Hyperparameters {
            n_trees,
            ..Default::default()
        }
    }

    #[test]
    fn single_tree_forest_is_that_tree() {
        let (x, y) = toy(150, 1);
        let f = ForestModel::fit(&x, &y, &hyper(1)).unwrap();
        for i in 0..x.rows() {
            assert_eq!(
                f.predict(x.row(i)).unwrap(),
                f.trees()[0].predict(x.row(i)).unwrap()
            );
        }
    }

    #[test]
    fn predict_is_mean_of_trees() {
        let (x, y) = toy(200, 2);
        let f = ForestModel::fit(&x, &y, &hyper(25)).unwrap();
        for i in (0..x.rows()).step_by(7) {
            let preds: Vec<f64> = f
                .trees()
                .iter()
                .map(|t| t.predict(x.row(i)).unwrap())
                .collect();
            let mut acc = 0.0;
            for p in &preds {
                acc += p;
            }
            let want = acc / preds.len() as f64;
            assert!((f.predict(x.row(i)).unwrap() - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn constant_target_gives_single_leaves() {
        let (x, _) = toy(120, 3);
        let y = vec![4.5; 120];
        let f = ForestModel::fit(&x, &y, &hyper(5)).unwrap();
        assert!(f.trees().iter().all(|t| t.nodes().len() == 1));
        assert_eq!(f.predict(x.row(0)).unwrap(), 4.5);
        assert!(matches!(f.importance(), Err(Error::NoSplits(_))));
    }

    #[test]
    fn rejects_small_or_empty_configs() {
        let (x, y) = toy(150, 4);
        assert!(ForestModel::fit(&x, &y, &hyper(0)).is_err());
        let small = x.select_rows(&(0..50).collect::<Vec<_>>());
        assert!(matches!(
            ForestModel::fit(&small, &y[..50], &hyper(3)),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn subsample_mode_draws_two_thirds() {
        let (x, y) = toy(300, 5);
        let h = Hyperparameters {
            sampling: SamplingMode::Subsample,
            ..hyper(4)
        };
        let f = ForestModel::fit(&x, &y, &h).unwrap();
        for b in f.bags().unwrap() {
            assert_eq!(b.in_bag_count(), 200);
        }
    }

    #[test]
    fn prefix_matches_smaller_fit() {
        let (x, y) = toy(150, 6);
        let big = ForestModel::fit(&x, &y, &hyper(12)).unwrap();
        let small = ForestModel::fit(&x, &y, &hyper(5)).unwrap();
        assert_eq!(big.truncated(5).unwrap(), small);
    }

    #[test]
    fn json_bundle_round_trip() {
        let (x, y) = toy(130, 7);
        let f = ForestModel::fit(&x, &y, &hyper(3)).unwrap();
        let back = ForestModel::from_json(&f.to_json(true).unwrap()).unwrap();
        assert_eq!(back, f);
        let slim = ForestModel::from_json(&f.to_json(false).unwrap()).unwrap();
        assert!(slim.bags().is_none());
        assert_eq!(
            slim.predict(x.row(3)).unwrap(),
            f.predict(x.row(3)).unwrap()
        );
    }

    #[test]
    fn never_split_feature_has_zero_importance() {
        let (x, y) = toy(200, 8);
        // append a constant column
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|j| x.column(j))
            .chain([vec![1.0; 200]])
            .collect();
        let x4 = Matrix::from_columns(&cols).unwrap();
        let f = ForestModel::fit(&x4, &y, &hyper(20)).unwrap();
        let imp = f.importance().unwrap();
        assert_eq!(imp.values[3], 0.0);
        assert!((imp.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
