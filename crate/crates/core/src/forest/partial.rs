use std::io::Write;

use rayon::prelude::*;

use super::ForestModel;
use crate::error::{Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 25;

/// Grid values along one axis.
#[derive(Debug, Clone, PartialEq)]
pub enum GridAxis {
    /// Equally spaced points over the observed training range; a single
    /// point sits at the column mean.
    Uniform(usize),
    /// Explicit points, clamped to the observed training range.
    Values(Vec<f64>),
}

impl Default for GridAxis {
    fn default() -> Self {
        GridAxis::Uniform(DEFAULT_GRID_POINTS)
    }
}

impl GridAxis {
    fn resolve(&self, mean: f64, (lo, hi): (f64, f64)) -> Result<Vec<f64>> {
        match self {
            GridAxis::Uniform(0) => {
                Err(Error::InvalidInput("grid needs at least one point".into()))
            }
            GridAxis::Uniform(1) => Ok(vec![mean]),
            GridAxis::Uniform(k) => {
                let step = (hi - lo) / (*k - 1) as f64;
                Ok((0..*k)
                    .map(|i| {
                        if i + 1 == *k {
                            hi
                        } else {
                            lo + step * i as f64
                        }
                    })
                    .collect())
            }
            GridAxis::Values(v) if v.is_empty() => {
                Err(Error::InvalidInput("grid needs at least one point".into()))
            }
            GridAxis::Values(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput("non-finite grid value".into()));
                }
                Ok(v.iter().map(|x| x.clamp(lo, hi)).collect())
            }
        }
    }
}

/// Forest predictions over a two-feature grid, all other features held at
/// their training means.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialGrid {
    pub feature_a: usize,
    pub feature_b: usize,
    pub name_a: String,
    pub name_b: String,
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
    /// `values[i][j]` is the prediction at `(a_values[i], b_values[j])`.
    pub values: Vec<Vec<f64>>,
}

impl PartialGrid {
    /// Long format: `<name_a>,<name_b>,prediction`, `a` varying slowest.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([self.name_a.as_str(), self.name_b.as_str(), "prediction"])?;
        for (i, a) in self.a_values.iter().enumerate() {
            for (j, b) in self.b_values.iter().enumerate() {
                w.write_record([a.to_string(), b.to_string(), self.values[i][j].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }
}

impl ForestModel {
    pub fn partial_grid(
        &self,
        feature_a: usize,
        feature_b: usize,
        axis_a: &GridAxis,
        axis_b: &GridAxis,
    ) -> Result<PartialGrid> {
        let p = self.n_features();
        if feature_a >= p || feature_b >= p {
            return Err(Error::InvalidInput(format!(
                "feature index out of range (model has {p} features)"
            )));
        }
        if feature_a == feature_b {
            return Err(Error::InvalidInput("grid features must differ".into()));
        }
        let means = self.column_means();
        let ranges = self.column_ranges();
        let a_values = axis_a.resolve(means[feature_a], ranges[feature_a])?;
        let b_values = axis_b.resolve(means[feature_b], ranges[feature_b])?;
        let values = a_values
            .par_iter()
            .map(|&a| {
                let mut point = means.to_vec();
                point[feature_a] = a;
                b_values
                    .iter()
                    .map(|&b| {
                        point[feature_b] = b;
                        self.predict_unchecked(&point)
                    })
                    .collect()
            })
            .collect();
        Ok(PartialGrid {
            feature_a,
            feature_b,
            name_a: self.feature_names[feature_a].clone(),
            name_b: self.feature_names[feature_b].clone(),
            a_values,
            b_values,
            values,
        })
    }

    pub fn partial_grid_by_name(
        &self,
        name_a: &str,
        name_b: &str,
        axis_a: &GridAxis,
        axis_b: &GridAxis,
    ) -> Result<PartialGrid> {
        let a = self.feature_index(name_a)?;
        let b = self.feature_index(name_b)?;
        self.partial_grid(a, b, axis_a, axis_b)
    }
}
