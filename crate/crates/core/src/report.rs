//! RMSE grid over forest hyperparameters next to the linear benchmarks.

use std::io::Write;

use crate::baselines::{compare, fit_ar1_design, fit_ols_design};
use crate::error::{Error, Result};
use crate::forest::{ForestModel, Hyperparameters};
use crate::metrics::rmse;
use crate::pipeline::{DesignMatrix, Target};

pub const DEFAULT_MIN_NODE_SIZES: [usize; 5] = [5, 10, 20, 30, 40];
pub const DEFAULT_TREE_COUNTS: [usize; 2] = [100, 1000];

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub min_node_size: usize,
    pub n_trees: usize,
    pub in_sample: f64,
    pub oob: f64,
    /// In-sample forest RMSE over OLS RMSE.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseGrid {
    pub target: Target,
    pub n_rows: usize,
    pub ar1: f64,
    pub ols: f64,
    pub rows: Vec<GridRow>,
}

/// One forest per min-node size, grown to the largest tree count; smaller
/// counts are its prefixes, which equal forests fitted with that count.
pub fn rmse_grid(
    design: &DesignMatrix,
    min_node_sizes: &[usize],
    tree_counts: &[usize],
    base: &Hyperparameters,
) -> Result<RmseGrid> {
    if min_node_sizes.is_empty() || tree_counts.is_empty() {
        return Err(Error::Config(
            "hyperparameter grid lists must be non-empty".into(),
        ));
    }
    if tree_counts.contains(&0) {
        return Err(Error::Config("tree counts must be positive".into()));
    }
    let ar1 = fit_ar1_design(design)?.rmse;
    let ols = fit_ols_design(design)?.rmse;
    let max_trees = *tree_counts.iter().max().unwrap();
    let mut rows = Vec::with_capacity(min_node_sizes.len() * tree_counts.len());
    for &m in min_node_sizes {
        let hyper = Hyperparameters {
            n_trees: max_trees,
            min_node_size: m,
            ..*base
        };
        let forest = ForestModel::fit_design(design, &hyper)?;
        let curve = forest.error_curve(design, tree_counts)?;
        for &k in tree_counts {
            let sub = forest.truncated(k)?;
            let in_sample = rmse(&sub.predict_matrix(&design.x)?, &design.y, None)?;
            let mse = curve
                .iter()
                .find(|c| c.0 == k)
                .expect("checkpoint present")
                .1;
            let ratio = compare(&[("forest", in_sample)], ols)?[0].ratio;
            rows.push(GridRow {
                min_node_size: m,
                n_trees: k,
                in_sample,
                oob: mse.sqrt(),
                ratio,
            });
        }
    }
    Ok(RmseGrid {
        target: design.target,
        n_rows: design.len(),
        ar1,
        ols,
        rows,
    })
}

impl RmseGrid {
    /// Benchmarks as a `#` line, then one CSV row per grid cell.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(
            writer,
            "# target={} rows={} ar1_in_sample={:.6} ols_in_sample={:.6}",
            self.target, self.n_rows, self.ar1, self.ols
        )?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "target",
            "min_node_size",
            "n_trees",
            "forest_in_sample",
            "forest_oob",
            "ratio_ols",
        ])?;
        for r in &self.rows {
            w.write_record([
                self.target.to_string(),
                r.min_node_size.to_string(),
                r.n_trees.to_string(),
                format!("{:.6}", r.in_sample),
                format!("{:.6}", r.oob),
                format!("{:.3}", r.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
