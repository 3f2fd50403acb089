use rayon::prelude::*;

use super::{BagMask, ForestModel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::rmse;
use crate::pipeline::DesignMatrix;

/// Out-of-bag predictions. Rows that sit in every bag have no prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct OobPredictions {
    /// `NaN` where unavailable.
    pub predictions: Vec<f64>,
    pub available: Vec<bool>,
    /// Number of trees averaged for each row.
    pub tree_counts: Vec<usize>,
}

impl OobPredictions {
    pub fn coverage(&self) -> usize {
        self.available.iter().filter(|&&a| a).count()
    }

    pub fn rmse(&self, actual: &[f64]) -> Result<f64> {
        rmse(&self.predictions, actual, Some(&self.available))
    }
}

impl ForestModel {
    /// Out-of-bag predictions for the design the model was fitted on.
    pub fn oob_predict(&self, design: &DesignMatrix) -> Result<OobPredictions> {
        if let Some(dates) = &self.train_dates {
            if *dates != design.dates {
                return Err(Error::Mismatch(
                    "design dates differ from the training dates".into(),
                ));
            }
        }
        if design.feature_names != self.feature_names {
            return Err(Error::Mismatch(
                "design features differ from the model".into(),
            ));
        }
        self.oob_predict_matrix(&design.x)
    }

    /// Out-of-bag predictions for the training matrix `x`.
    pub fn oob_predict_matrix(&self, x: &Matrix) -> Result<OobPredictions> {
        let bags = self.checked_bags(x)?;
        let per_row: Vec<(f64, usize)> = (0..x.rows())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                let mut sum = 0.0;
                let mut count = 0;
                for (tree, bag) in self.trees.iter().zip(bags) {
                    if !bag.in_bag(i) {
                        sum += tree.predict_unchecked(row);
                        count += 1;
                    }
                }
                (sum, count)
            })
            .collect();
        Ok(OobPredictions {
            predictions: per_row
                .iter()
                .map(|&(s, c)| if c > 0 { s / c as f64 } else { f64::NAN })
                .collect(),
            available: per_row.iter().map(|&(_, c)| c > 0).collect(),
            tree_counts: per_row.iter().map(|&(_, c)| c).collect(),
        })
    }

    /// Out-of-bag MSE using only the first `k` trees, for each checkpoint
    /// `k`. Checkpoints are returned sorted and deduplicated.
    pub fn error_curve(
        &self,
        design: &DesignMatrix,
        checkpoints: &[usize],
    ) -> Result<Vec<(usize, f64)>> {
        if let Some(dates) = &self.train_dates {
            if *dates != design.dates {
                return Err(Error::Mismatch(
                    "design dates differ from the training dates".into(),
                ));
            }
        }
        self.error_curve_matrix(&design.x, &design.y, checkpoints)
    }

    pub fn error_curve_matrix(
        &self,
        x: &Matrix,
        y: &[f64],
        checkpoints: &[usize],
    ) -> Result<Vec<(usize, f64)>> {
        let bags = self.checked_bags(x)?;
        if y.len() != x.rows() {
            return Err(Error::InvalidInput(
                "target length differs from rows".into(),
            ));
        }
        let mut ks = checkpoints.to_vec();
        ks.sort_unstable();
        ks.dedup();
        if ks.first() == Some(&0) {
            return Err(Error::InvalidInput("checkpoint 0 has no trees".into()));
        }
        if let Some(&k) = ks.iter().find(|&&k| k > self.trees.len()) {
            return Err(Error::InvalidInput(format!(
                "checkpoint {k} exceeds {} trees",
                self.trees.len()
            )));
        }
        // per row: (sum, count) after each checkpoint
        let per_row: Vec<Vec<(f64, usize)>> = (0..x.rows())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                let mut out = Vec::with_capacity(ks.len());
                let mut sum = 0.0;
                let mut count = 0;
                let mut next = 0;
                for (t, (tree, bag)) in self.trees.iter().zip(bags).enumerate() {
                    if !bag.in_bag(i) {
                        sum += tree.predict_unchecked(row);
                        count += 1;
                    }
                    while next < ks.len() && ks[next] == t + 1 {
                        out.push((sum, count));
                        next += 1;
                    }
                    if next == ks.len() {
                        break;
                    }
                }
                out
            })
            .collect();
        ks.iter()
            .enumerate()
            .map(|(c, &k)| {
                let mut sq = 0.0;
                let mut n = 0usize;
                for (i, acc) in per_row.iter().enumerate() {
                    let (s, cnt) = acc[c];
                    if cnt > 0 {
                        let d = s / cnt as f64 - y[i];
                        sq += d * d;
                        n += 1;
                    }
                }
                if n == 0 {
                    return Err(Error::InsufficientData {
                        what: format!("out-of-bag rows after {k} trees"),
                        needed: 1,
                        got: 0,
                    });
                }
                Ok((k, sq / n as f64))
            })
            .collect()
    }

    fn checked_bags(&self, x: &Matrix) -> Result<&[BagMask]> {
        let bags = self
            .bags
            .as_deref()
            .ok_or_else(|| Error::Mismatch("model was stored without bag masks".into()))?;
        if x.rows() != self.n_train_rows {
            return Err(Error::Mismatch(format!(
                "model was fitted on {} rows, got {}",
                self.n_train_rows,
                x.rows()
            )));
        }
        if x.cols() != self.n_features() {
            return Err(Error::Mismatch(format!(
                "model has {} features, got {}",
                self.n_features(),
                x.cols()
            )));
        }
        Ok(bags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::Hyperparameters;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..2).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let y = rows
            .iter()
            .map(|r| r[0] * r[1] + 0.05 * rng.random_range(-1.0..1.0))
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn single_tree_oob_uses_its_out_of_bag_rows() {
        let (x, y) = toy(150);
        let h = Hyperparameters {
            n_trees: 1,
            ..Default::default()
        };
        let f = ForestModel::fit(&x, &y, &h).unwrap();
        let oob = f.oob_predict_matrix(&x).unwrap();
        let bag = &f.bags().unwrap()[0];
        for i in 0..150 {
            assert_eq!(oob.available[i], !bag.in_bag(i));
            if oob.available[i] {
                assert_eq!(oob.predictions[i], f.trees()[0].predict(x.row(i)).unwrap());
            } else {
                assert!(oob.predictions[i].is_nan());
            }
        }
    }

    #[test]
    fn last_checkpoint_matches_oob_rmse() {
        let (x, y) = toy(200);
        let h = Hyperparameters {
            n_trees: 40,
            ..Default::default()
        };
        let f = ForestModel::fit(&x, &y, &h).unwrap();
        let curve = f.error_curve_matrix(&x, &y, &[40, 1, 10]).unwrap();
        assert_eq!(
            curve.iter().map(|c| c.0).collect::<Vec<_>>(),
            vec![1, 10, 40]
        );
        let r = f.oob_predict_matrix(&x).unwrap().rmse(&y).unwrap();
        assert!((curve[2].1 - r * r).abs() <= 1e-12 * curve[2].1);
    }

    #[test]
    fn bad_checkpoints_are_rejected() {
        let (x, y) = toy(120);
        let h = Hyperparameters {
            n_trees: 3,
            ..Default::default()
        };
        let f = ForestModel::fit(&x, &y, &h).unwrap();
        assert!(f.error_curve_matrix(&x, &y, &[0, 2]).is_err());
        assert!(f.error_curve_matrix(&x, &y, &[4]).is_err());
    }

    #[test]
    fn row_count_mismatch_is_rejected() {
        let (x, y) = toy(120);
        let h = Hyperparameters {
            n_trees: 2,
            ..Default::default()
        };
        let f = ForestModel::fit(&x, &y, &h).unwrap();
        let fewer = x.select_rows(&(0..100).collect::<Vec<_>>());
        assert!(matches!(
            f.oob_predict_matrix(&fewer),
            Err(Error::Mismatch(_))
        ));
    }
}
