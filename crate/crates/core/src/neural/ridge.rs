use super::train::SampleSet;
use crate::error::{Error, Result};
use crate::eval::nmse;
use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Closed-form multi-output ridge regression with intercept; the
/// regularization strength is chosen on a validation set by NMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    /// `[d x n_joints]` coefficients on centered inputs.
    pub w: Array2<f64>,
    pub x_mean: Array1<f64>,
    pub y_mean: Array1<f64>,
    pub lambda: f64,
}

/// Default log-spaced grid 1e-3 .. 1e3.
pub fn default_lambda_grid() -> Vec<f64> {
    (-3..=3).map(|e| 10f64.powi(e)).collect()
}

pub fn ridge_fit(train: &SampleSet, val: &SampleSet, lambda_grid: &[f64]) -> Result<RidgeModel> {
    if lambda_grid.is_empty() || lambda_grid.iter().any(|&l| l <= 0.0) {
        return Err(Error::Config("lambda grid must be non-empty and positive".into()));
    }
    let x = train.x_flat();
    let y = &train.y;
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::InsufficientData("ridge needs at least 2 samples".into()));
    }
    let x_mean = x.mean_axis(ndarray::Axis(0)).unwrap();
    let y_mean = y.mean_axis(ndarray::Axis(0)).unwrap();
    let xc = &x - &x_mean;
    let yc = y - &y_mean;

    // normal-equation pieces, shared across the grid
    let xtx = DMatrix::from_fn(d, d, |i, j| xc.column(i).dot(&xc.column(j)));
    let xty = DMatrix::from_fn(d, y.ncols(), |i, j| xc.column(i).dot(&yc.column(j)));

    let mut best: Option<(f64, RidgeModel)> = None;
    for &lambda in lambda_grid {
        let a = &xtx + DMatrix::identity(d, d) * lambda;
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::RankDeficient(format!("ridge system at lambda {lambda}")))?;
        let w_na = chol.solve(&xty);
        let w = Array2::from_shape_fn((d, y.ncols()), |(i, j)| w_na[(i, j)]);
        let model = RidgeModel { w, x_mean: x_mean.clone(), y_mean: y_mean.clone(), lambda };
        let pred = model.predict(val);
        let score = nmse(&pred, &val.y)?.mean;
        if best.as_ref().map_or(true, |(s, _)| score < *s) {
            best = Some((score, model));
        }
    }
    Ok(best.unwrap().1)
}

impl RidgeModel {
    pub fn predict(&self, set: &SampleSet) -> Array2<f64> {
        let xc = &set.x_flat() - &self.x_mean;
        xc.dot(&self.w) + &self.y_mean
    }
}
