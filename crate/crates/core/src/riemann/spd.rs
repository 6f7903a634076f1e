use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

const SYMMETRY_TOL: f64 = 1e-10;

/// Counts eigenvalue clamp events across the process (numerically
/// semi-definite inputs that were floored before taking logs).
static CLAMP_EVENTS: AtomicU64 = AtomicU64::new(0);

pub fn clamp_events() -> u64 {
    CLAMP_EVENTS.load(Ordering::Relaxed)
}

/// A validated symmetric positive-definite matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpdMatrix {
    m: DMatrix<f64>,
    /// Lazily computed whitener (G^{-1/2}); tangent references are projected
    /// against thousands of times, so the eigendecomposition is done once.
    #[serde(skip)]
    whitener: OnceLock<DMatrix<f64>>,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl SpdMatrix {
    /// Validates symmetry and positive definiteness.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::ShapeMismatch(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        let asym = (&m - m.transpose()).amax();
        if asym >= SYMMETRY_TOL {
            return Err(Error::NotSpd(format!("asymmetry {asym} exceeds {SYMMETRY_TOL}")));
        }
        let min_eig = SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig <= 0.0 {
            return Err(Error::NotSpd(format!("smallest eigenvalue {min_eig} <= 0")));
        }
        Ok(Self { m, whitener: OnceLock::new() })
    }

    /// Wraps a matrix already known to be SPD (internal fast path).
    pub(crate) fn from_spd_unchecked(m: DMatrix<f64>) -> Self {
        Self { m, whitener: OnceLock::new() }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_spd_unchecked(DMatrix::identity(n, n))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.m.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// G^{-1/2}, used for whitening before the log map (cached).
    pub fn inv_sqrt(&self) -> DMatrix<f64> {
        self.whitener.get_or_init(|| symmetric_fn(&self.m, |l| 1.0 / l.sqrt())).clone()
    }

    pub fn sqrt(&self) -> DMatrix<f64> {
        symmetric_fn(&self.m, |l| l.sqrt())
    }
}

/// Applies a scalar function to the eigenvalues of a symmetric matrix,
/// flooring them at 1e-12 x max eigenvalue (clamp events are counted).
fn symmetric_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = 1e-12 * max.max(f64::MIN_POSITIVE);
    let mut clamped = false;
    let vals: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            if l < floor {
                clamped = true;
                f(floor)
            } else {
                f(l)
            }
        })
        .collect();
    if clamped {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
    }
    let u = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals));
    u * d * u.transpose()
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Matrix logarithm of an SPD matrix via eigendecomposition.
pub fn spd_log(c: &SpdMatrix) -> DMatrix<f64> {
    symmetric_fn(c.matrix(), f64::ln)
}

/// Matrix exponential of a symmetric matrix; the result is SPD.
pub fn spd_exp(s: &DMatrix<f64>) -> Result<SpdMatrix> {
    if s.nrows() != s.ncols() {
        return Err(Error::ShapeMismatch(format!("{}x{} is not square", s.nrows(), s.ncols())));
    }
    let asym = (s - s.transpose()).amax();
    if asym >= SYMMETRY_TOL {
        return Err(Error::InvalidInput(format!("matrix exp input asymmetry {asym}")));
    }
    let eig = SymmetricEigen::new(s.clone());
    let vals: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.exp()).collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals));
    let m = symmetrize(&(&eig.eigenvectors * d * eig.eigenvectors.transpose()));
    Ok(SpdMatrix::from_spd_unchecked(m))
}

/// Covariance regularization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shrinkage {
    None,
    LedoitWolf,
    Fixed(f64),
}

/// Sample covariance of a `[n_channels x n_window]` window (rows centered,
/// population 1/N convention), optionally shrunk toward the scaled identity
/// `(tr(C)/n) I`.
pub fn covariance(window: ArrayView2<'_, f64>, shrinkage: Shrinkage) -> Result<SpdMatrix> {
    let n_ch = window.nrows();
    let t = window.ncols();
    if t < 2 {
        return Err(Error::InsufficientData(format!("covariance window of {t} samples")));
    }
    // center rows (contiguous copies; this is the per-window hot path)
    let rows: Vec<Vec<f64>> = window
        .rows()
        .into_iter()
        .map(|r| {
            let m = r.sum() / t as f64;
            r.iter().map(|v| v - m).collect()
        })
        .collect();
    let mut c = DMatrix::<f64>::zeros(n_ch, n_ch);
    for i in 0..n_ch {
        for j in i..n_ch {
            let acc: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            let v = acc / t as f64;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }

    let alpha = match shrinkage {
        Shrinkage::None => 0.0,
        Shrinkage::Fixed(a) => {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidInput(format!("shrinkage alpha {a} outside [0, 1]")));
            }
            a
        }
        Shrinkage::LedoitWolf => ledoit_wolf_alpha(&rows, &c),
    };

    let mu = c.trace() / n_ch as f64;
    if alpha > 0.0 {
        let target = DMatrix::identity(n_ch, n_ch) * mu;
        c = &c * (1.0 - alpha) + target * alpha;
    }

    // Cholesky as the cheap positive-definiteness check; the eigenvalue is
    // only computed for the error message.
    if nalgebra::Cholesky::new(c.clone()).is_none() {
        let min_eig = SymmetricEigen::new(c.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        return Err(Error::RankDeficient(format!(
            "covariance smallest eigenvalue {min_eig} <= 0 (shrinkage {shrinkage:?})"
        )));
    }
    Ok(SpdMatrix::from_spd_unchecked(c))
}

/// Analytic Ledoit-Wolf shrinkage intensity toward the scaled identity,
/// computed from centered observation rows (`n` rows of `T` samples) and
/// their sample covariance `c`.
fn ledoit_wolf_alpha(rows: &[Vec<f64>], c: &DMatrix<f64>) -> f64 {
    let n = rows.len();
    let t = rows[0].len() as f64;
    let mu = c.trace() / n as f64;
    // squared distance of C from the target, per dimension
    let mut d2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { mu } else { 0.0 };
            d2 += (c[(i, j)] - target).powi(2);
        }
    }
    d2 /= n as f64;
    if d2 <= 0.0 {
        return 1.0;
    }
    // average squared distance of per-sample outer products from C
    let mut b2_bar = 0.0;
    for i in 0..n {
        for j in 0..n {
            let cij = c[(i, j)];
            b2_bar += rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| {
                    let d = a * b - cij;
                    d * d
                })
                .sum::<f64>();
        }
    }
    b2_bar /= t * t * n as f64;
    let b2 = b2_bar.min(d2);
    (b2 / d2).clamp(0.0, 1.0)
}

/// Geometric-mean result; `converged` is false when the fixed-point
/// iteration hit `max_iter` before the residual dropped below tolerance.
#[derive(Debug, Clone)]
pub struct GeometricMean {
    pub mean: SpdMatrix,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// Karcher (geometric) mean of SPD matrices under the affine-invariant
/// metric: fixed-point iteration
/// `G <- G^{1/2} exp( mean_i log(G^{-1/2} C_i G^{-1/2}) ) G^{1/2}`,
/// initialized at the arithmetic mean.
pub fn geometric_mean(cs: &[SpdMatrix], tol: f64, max_iter: usize) -> Result<GeometricMean> {
    if cs.is_empty() {
        return Err(Error::InvalidInput("geometric mean of empty set".into()));
    }
    let n = cs[0].dim();
    if cs.iter().any(|c| c.dim() != n) {
        return Err(Error::ShapeMismatch("geometric mean inputs differ in dimension".into()));
    }
    let mut g = DMatrix::<f64>::zeros(n, n);
    for c in cs {
        g += c.matrix();
    }
    g /= cs.len() as f64;

    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let gm = SpdMatrix::from_spd_unchecked(symmetrize(&g));
        let g_half = gm.sqrt();
        let g_inv_half = gm.inv_sqrt();
        let mut mean_log = DMatrix::<f64>::zeros(n, n);
        for c in cs {
            let whitened = symmetrize(&(&g_inv_half * c.matrix() * &g_inv_half));
            mean_log += symmetric_fn(&whitened, f64::ln);
        }
        mean_log /= cs.len() as f64;
        residual = mean_log.norm(); // Frobenius
        if residual < tol {
            return Ok(GeometricMean {
                mean: SpdMatrix::from_spd_unchecked(symmetrize(&g)),
                converged: true,
                iterations: it,
                residual,
            });
        }
        let step = spd_exp(&symmetrize(&mean_log))?;
        g = symmetrize(&(&g_half * step.matrix() * &g_half));
    }
    Ok(GeometricMean {
        mean: SpdMatrix::from_spd_unchecked(symmetrize(&g)),
        converged: false,
        iterations: max_iter,
        residual,
    })
}

/// Tangent-space image of an SPD matrix at base point `reference`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub v: Vec<f64>,
    pub reference: SpdMatrix,
}

impl TangentVector {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Upper-triangular flatten of a symmetric matrix with sqrt(2)-weighted
/// off-diagonals, so the Euclidean norm of the vector equals the Frobenius
/// norm of the matrix.
pub fn symmetric_to_vector(s: &DMatrix<f64>) -> Vec<f64> {
    let n = s.nrows();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    let sqrt2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        for j in i..n {
            v.push(if i == j { s[(i, j)] } else { sqrt2 * s[(i, j)] });
        }
    }
    v
}

/// Inverse of [`symmetric_to_vector`].
pub fn vector_to_symmetric(v: &[f64], n: usize) -> Result<DMatrix<f64>> {
    if v.len() != n * (n + 1) / 2 {
        return Err(Error::ShapeMismatch(format!(
            "tangent vector of length {} for dimension {n}",
            v.len()
        )));
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut s = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let val = if i == j { v[k] } else { v[k] / sqrt2 };
            s[(i, j)] = val;
            s[(j, i)] = val;
            k += 1;
        }
    }
    Ok(s)
}

/// Projects `c` into the tangent space at `g`: vectorized
/// `log(G^{-1/2} C G^{-1/2})`.
pub fn tangent_project(c: &SpdMatrix, g: &SpdMatrix) -> Result<TangentVector> {
    if c.dim() != g.dim() {
        return Err(Error::ShapeMismatch(format!(
            "projecting {}x{} at base of dimension {}",
            c.dim(),
            c.dim(),
            g.dim()
        )));
    }
    let w = g.inv_sqrt();
    let whitened = symmetrize(&(&w * c.matrix() * &w));
    let s = symmetric_fn(&whitened, f64::ln);
    Ok(TangentVector { v: symmetric_to_vector(&s), reference: g.clone() })
}

/// Exponential map back from a tangent vector: `G^{1/2} exp(S) G^{1/2}`.
pub fn tangent_retract(tv: &TangentVector) -> Result<SpdMatrix> {
    let n = tv.reference.dim();
    let s = vector_to_symmetric(&tv.v, n)?;
    let e = spd_exp(&s)?;
    let h = tv.reference.sqrt();
    Ok(SpdMatrix::from_spd_unchecked(symmetrize(&(&h * e.matrix() * &h))))
}
