//! Linear benchmarks: OLS on the predictors and AR(1) on the target.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pipeline::DesignMatrix;

pub const INTERCEPT_NAME: &str = "(intercept)";

/// Condition numbers above this are logged as a warning.
pub const CONDITION_WARNING: f64 = 1e8;

// Relative size of an R diagonal entry below which a column counts as
// collinear with the ones before it (columns are unit-norm at this point).
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub rmse: f64,
    /// Ratio of extreme singular values of the design with its constant.
    pub condition_number: f64,
}

impl LinearFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }

    pub fn sse(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }
}

/// OLS with an intercept, regressors named `x0, x1, ...`.
pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<LinearFit> {
    let names: Vec<String> = (0..x.cols()).map(|j| format!("x{j}")).collect();
    fit_ols_named(x, y, &names)
}

/// Least squares via Householder QR on the column-equilibrated design.
pub fn fit_ols_named(x: &Matrix, y: &[f64], names: &[String]) -> Result<LinearFit> {
    let n = y.len();
    let k = x.cols();
    if x.rows() != n || names.len() != k {
        return Err(Error::InvalidInput(format!(
            "{} rows, {} targets, {} columns, {} names",
            x.rows(),
            n,
            k,
            names.len()
        )));
    }
    if n <= k + 1 {
        return Err(Error::InsufficientData {
            what: format!("OLS with {k} regressors"),
            needed: k + 2,
            got: n,
        });
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite regression data".into()));
    }
    let column_name = |j: usize| {
        if j == 0 {
            INTERCEPT_NAME.to_string()
        } else {
            names[j - 1].clone()
        }
    };

    let design = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
    let mut scales = Vec::with_capacity(k + 1);
    let mut zero_columns = Vec::new();
    for j in 0..=k {
        let norm = design.column(j).norm();
        if norm == 0.0 {
            zero_columns.push(column_name(j));
        }
        scales.push(norm);
    }
    if !zero_columns.is_empty() {
        return Err(Error::RankDeficient {
            columns: zero_columns,
        });
    }
    let mut scaled = design.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*s);
    }

    let qr = scaled.qr();
    let r = qr.r();
    let max_diag = (0..=k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let collinear: Vec<String> = (0..=k)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOLERANCE * max_diag)
        .map(column_name)
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().tr_mul(&yv);
    let beta_scaled = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient {
            columns: vec!["(triangular solve failed)".into()],
        })?;
    let beta: Vec<f64> = beta_scaled
        .iter()
        .zip(&scales)
        .map(|(b, s)| b / s)
        .collect();

    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let fitted = beta[0] + (0..k).map(|j| beta[j + 1] * x.get(i, j)).sum::<f64>();
            y[i] - fitted
        })
        .collect();
    let rmse = (residuals.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();

    let sv = design.singular_values();
    let (smax, smin) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    let condition_number = smax / smin;
    if condition_number > CONDITION_WARNING {
        log::warn!("ill-conditioned OLS design: condition number {condition_number:.3e}");
    }

    Ok(LinearFit {
        names: names.to_vec(),
        coefficients: beta[1..].to_vec(),
        intercept: beta[0],
        residuals,
        rmse,
        condition_number,
    })
}

/// OLS of the design target on all predictors.
pub fn fit_ols_design(design: &DesignMatrix) -> Result<LinearFit> {
    fit_ols_named(&design.x, &design.y, &design.feature_names)
}

/// Minimum series length accepted by [`fit_ar1`].
pub const MIN_AR1_LENGTH: usize = 30;

/// Regression of `y[t]` on a constant and `y[t - lag]`, over `t >= lag`.
pub fn fit_ar1(y: &[f64], lag: usize) -> Result<LinearFit> {
    if lag == 0 {
        return Err(Error::InvalidInput("AR lag must be positive".into()));
    }
    if y.len() < MIN_AR1_LENGTH.max(lag + 3) {
        return Err(Error::InsufficientData {
            what: "AR(1) series".into(),
            needed: MIN_AR1_LENGTH.max(lag + 3),
            got: y.len(),
        });
    }
    let lagged = Matrix::new(y.len() - lag, 1, y[..y.len() - lag].to_vec())?;
    fit_ols_named(&lagged, &y[lag..], &[format!("lag{lag}")])
}

/// AR(1) on the design rows, using the `reversal` column as the lag.
pub fn fit_ar1_design(design: &DesignMatrix) -> Result<LinearFit> {
    let j = design.feature_index("reversal")?;
    let lagged = design.x.select_columns(&[j]);
    fit_ols_named(&lagged, &design.y, &[design.feature_names[j].clone()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub name: String,
    pub value: f64,
    /// `value / reference`
    pub ratio: f64,
    /// `1 - ratio`; multiply by 100 for "percent below".
    pub below: f64,
}

/// Ratio of each value to a reference RMSE.
pub fn compare(reportees: &[(&str, f64)], reference: f64) -> Result<Vec<RatioRow>> {
    if !(reference > 0.0) || !reference.is_finite() {
        return Err(Error::InvalidInput(format!(
            "reference RMSE must be positive, got {reference}"
        )));
    }
    Ok(reportees
        .iter()
        .map(|&(name, value)| {
            let ratio = value / reference;
            RatioRow {
                name: name.to_string(),
                value,
                ratio,
                below: 1.0 - ratio,
            }
        })
        .collect())
}

/// `model,term,value` rows: coefficients, then `rmse`.
pub fn write_fit_summary<W: Write>(writer: W, fits: &[(&str, &LinearFit)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["model", "term", "value"])?;
    for (model, fit) in fits {
        w.write_record([*model, INTERCEPT_NAME, &format!("{:.6}", fit.intercept)])?;
        for (name, b) in fit.names.iter().zip(&fit.coefficients) {
            w.write_record([*model, name.as_str(), &format!("{b:.6}")])?;
        }
        w.write_record([*model, "rmse", &format!("{:.6}", fit.rmse)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = Matrix::new(5, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let y: Vec<f64> = (0..5).map(|i| 2.0 * i as f64 + 1.0).collect();
        let f = fit_ols(&x, &y).unwrap();
        assert!((f.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!(f.rmse < 1e-12);
    }

    #[test]
    fn orthogonal_target_gives_zero_coefficients() {
        // centred regressor orthogonal to a centred target
        let x = Matrix::new(4, 1, vec![-1.0, 1.0, -1.0, 1.0]).unwrap();
        let y = [1.0, 1.0, -1.0, -1.0];
        let f = fit_ols(&x, &y).unwrap();
        assert!(f.coefficients[0].abs() < 1e-14);
        assert!(f.intercept.abs() < 1e-14);
    }

    #[test]
    fn collinear_columns_are_named() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 7.0];
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let x = Matrix::from_columns(&[a, b]).unwrap();
        let names = ["gas".to_string(), "gas2".to_string()];
        match fit_ols_named(&x, &[1.0, 3.0, 2.0, 5.0, 4.0, 6.0], &names).unwrap_err() {
            Error::RankDeficient { columns } => assert_eq!(columns, vec!["gas2"]),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn constant_regressor_collides_with_intercept() {
        let x = Matrix::new(5, 1, vec![3.0; 5]).unwrap();
        assert!(matches!(
            fit_ols(&x, &[1.0, 2.0, 3.0, 4.0, 5.0]),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn too_few_rows() {
        let x = Matrix::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 7.0]).unwrap();
        assert!(matches!(
            fit_ols(&x, &[1.0, 2.0, 3.0]),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn constant_series_is_rank_error_for_ar1() {
        assert!(matches!(
            fit_ar1(&[0.3; 60], 1),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn periodic_series_is_a_unit_root_at_its_period() {
        let y: Vec<f64> = (0..120).map(|t| ((t % 22) as f64 * 0.7).sin()).collect();
        let f = fit_ar1(&y, 22).unwrap();
        assert!((f.coefficients[0] - 1.0).abs() < 1e-10);
        assert!(f.intercept.abs() < 1e-10);
        assert!(f.rmse < 1e-10);
    }

    #[test]
    fn ratio_table() {
        let rows = compare(&[("forest", 0.3), ("same", 0.4)], 0.4).unwrap();
        assert!((rows[0].ratio - 0.75).abs() < 1e-15);
        assert!((rows[0].below - 0.25).abs() < 1e-15);
        assert_eq!(rows[1].ratio, 1.0);
        assert_eq!(rows[1].below, 0.0);
        assert!(compare(&[("x", 1.0)], 0.0).is_err());
    }

    #[test]
    fn summary_lists_terms_then_rmse() {
        let x = Matrix::new(5, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let f = fit_ols(&x, &[1.0, 3.0, 5.0, 7.0, 9.5]).unwrap();
        let mut buf = Vec::new();
        write_fit_summary(&mut buf, &[("ols", &f)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "model,term,value");
        assert!(lines[1].starts_with("ols,(intercept),"));
        assert!(lines[3].starts_with("ols,rmse,"));
    }
}
