use crate::error::{Error, Result};
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

/// Normalized mean squared error, per joint and averaged.
///
/// For each joint, MSE of the predictions divided by the variance of the
/// true trace over the evaluated segment (population variance). 0 is a
/// perfect fit; 1 matches predicting the segment mean. Joints whose true
/// trace is constant have an undefined ratio: they are recorded in
/// `excluded` and skipped by `mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nmse {
    pub per_joint: Vec<f64>,
    pub mean: f64,
    /// Indices of zero-variance joints excluded from the mean.
    pub excluded: Vec<usize>,
}

pub fn nmse(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<Nmse> {
    check_paired(pred, truth)?;
    let n = truth.nrows() as f64;
    let mut per_joint = Vec::with_capacity(truth.ncols());
    let mut excluded = Vec::new();
    let mut sum = 0.0;
    let mut kept = 0usize;
    for j in 0..truth.ncols() {
        let t = truth.column(j);
        let p = pred.column(j);
        let mean = t.sum() / n;
        let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mse = p.iter().zip(t.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
        if var == 0.0 {
            per_joint.push(f64::NAN);
            excluded.push(j);
        } else {
            let v = mse / var;
            per_joint.push(v);
            sum += v;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::UndefinedCorrelation(
            "all joints have zero variance; NMSE undefined".into(),
        ));
    }
    Ok(Nmse { per_joint, mean: sum / kept as f64, excluded })
}

/// Mean absolute error in the units of the inputs (degrees for joint
/// angles), per joint and averaged over joints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsError {
    pub per_joint: Vec<f64>,
    pub mean: f64,
}

pub fn absolute_error(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<AbsError> {
    check_paired(pred, truth)?;
    let n = truth.nrows() as f64;
    let per_joint: Vec<f64> = (0..truth.ncols())
        .map(|j| {
            pred.column(j)
                .iter()
                .zip(truth.column(j).iter())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / n
        })
        .collect();
    let mean = per_joint.iter().sum::<f64>() / per_joint.len() as f64;
    Ok(AbsError { per_joint, mean })
}

fn check_paired(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<()> {
    if pred.dim() != truth.dim() {
        return Err(Error::ShapeMismatch(format!(
            "predictions {:?} vs truth {:?}",
            pred.dim(),
            truth.dim()
        )));
    }
    if truth.nrows() == 0 {
        return Err(Error::InsufficientData("no samples to score".into()));
    }
    if pred.iter().any(|v| !v.is_finite()) || truth.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite values in scored arrays".into()));
    }
    Ok(())
}

/// PCA explained-variance summary over a sample matrix `[n x d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    /// Eigenvalues of the sample covariance, descending, negatives clamped
    /// to zero.
    pub eigenvalues: Vec<f64>,
    /// Cumulative explained-variance ratios in `[0, 1]`.
    pub cumulative_ratio: Vec<f64>,
    /// Smallest component count whose cumulative ratio reaches `threshold`.
    pub n_components: usize,
    pub threshold: f64,
}

pub fn pca_explained_variance(x: &Array2<f64>, threshold: f64) -> Result<PcaSummary> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::InsufficientData(format!("PCA needs >= 2 samples, got {n}")));
    }
    if !(0.0 < threshold && threshold <= 1.0) {
        return Err(Error::Config(format!("PCA threshold must be in (0, 1], got {threshold}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite values in PCA input".into()));
    }
    let mean = x.mean_axis(Axis(0)).unwrap();
    let xc = x - &mean;
    let cov = nalgebra::DMatrix::from_fn(d, d, |i, j| {
        xc.column(i).dot(&xc.column(j)) / (n as f64 - 1.0)
    });
    let mut eig: Vec<f64> = cov
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&v| v.max(0.0))
        .collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = eig.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("PCA input has zero total variance".into()));
    }
    let mut cum = 0.0;
    let mut cumulative_ratio = Vec::with_capacity(d);
    let mut n_components = d;
    for (i, &v) in eig.iter().enumerate() {
        cum += v / total;
        cumulative_ratio.push(cum.min(1.0));
        if cum >= threshold && n_components == d {
            n_components = i + 1;
        }
    }
    Ok(PcaSummary { eigenvalues: eig, cumulative_ratio, n_components, threshold })
}
