//! Small dense symmetric-positive-definite linear algebra.
//!
//! Matrices here are tiny (the worked example is 2x2), so everything is
//! stored dense in row-major order and factored eagerly.

use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated (and averaged away) when building a
/// [`CovarianceMatrix`].
pub const SYMMETRY_RTOL: f64 = 1e-9;

/// Cholesky pivots at or below this fraction of the largest diagonal entry
/// are treated as singular.
pub const PIVOT_RTOL: f64 = 1e-12;

/// A real vector in R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Vector(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `self - other`, checked for matching dimension.
    pub fn sub(&self, other: &[f64]) -> Result<Vector> {
        check_dim(self.dim(), other.len())?;
        Ok(Vector(self.0.iter().zip(other).map(|(a, b)| a - b).collect()))
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Dense n x n matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::BadShape { dim, got: entries.len() });
        }
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(SquareMatrix { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::BadShape { dim, got: dim * (dim - 1) + bad.len() });
        }
        Self::from_row_major(dim, rows.concat())
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut entries = vec![0.0; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            entries[i * dim + i] = *d;
        }
        SquareMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.dim..(row + 1) * self.dim]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn diag(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).map(move |i| self.get(i, i))
    }

    pub fn transpose(&self) -> SquareMatrix {
        let n = self.dim;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.get(i, j);
            }
        }
        SquareMatrix { dim: n, entries }
    }

    pub fn scale(&self, c: f64) -> SquareMatrix {
        SquareMatrix { dim: self.dim, entries: self.entries.iter().map(|v| v * c).collect() }
    }

    pub fn matmul(&self, rhs: &SquareMatrix) -> Result<SquareMatrix> {
        check_dim(self.dim, rhs.dim)?;
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    out[i * n + j] += a * rhs.get(k, j);
                }
            }
        }
        Ok(SquareMatrix { dim: n, entries: out })
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, v.len())?;
        Ok((0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest |m_ij - m_ji| together with its position.
    fn worst_asymmetry(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let gap = (self.get(i, j) - self.get(j, i)).abs();
                if gap > worst.2 {
                    worst = (i, j, gap);
                }
            }
        }
        worst
    }

    fn symmetrized(&self) -> SquareMatrix {
        let n = self.dim;
        let mut entries = self.entries.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.get(i, j) + self.get(j, i));
                entries[i * n + j] = avg;
                entries[j * n + i] = avg;
            }
        }
        SquareMatrix { dim: n, entries }
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    fn index(&self, (row, col): (usize, usize)) -> &f64 {
        &self.entries[row * self.dim + col]
    }
}

impl Serialize for SquareMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SquareMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SquareMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Cholesky factorization `m = L Lᵀ`, returning the lower-triangular `L`.
///
/// `tol` is an absolute threshold on the pivots (the values whose square
/// roots become the diagonal of `L`). Symmetry is checked relative to the
/// largest entry.
pub fn cholesky(m: &SquareMatrix, tol: f64) -> Result<SquareMatrix> {
    let (row, col, gap) = m.worst_asymmetry();
    if gap > SYMMETRY_RTOL * m.max_abs() {
        return Err(Error::NotSymmetric { row, col, gap });
    }
    let n = m.dim();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let pivot = m.get(j, j) - (0..j).map(|k| l[j * n + k] * l[j * n + k]).sum::<f64>();
        if !(pivot > tol) {
            return Err(Error::NotPositiveDefinite { index: j, pivot, tol });
        }
        let ljj = pivot.sqrt();
        l[j * n + j] = ljj;
        for i in (j + 1)..n {
            let s = m.get(i, j) - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            l[i * n + j] = s / ljj;
        }
    }
    Ok(SquareMatrix { dim: n, entries: l })
}

/// Solve `L y = b` for lower-triangular `L`.
fn forward_substitute(l: &SquareMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.dim();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l.get(i, k) * y[k]).sum();
        y[i] = (b[i] - s) / l.get(i, i);
    }
    y
}

/// Solve `Lᵀ x = y` for lower-triangular `L`.
fn back_substitute(l: &SquareMatrix, y: &[f64]) -> Vec<f64> {
    let n = l.dim();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| l.get(k, i) * x[k]).sum();
        x[i] = (y[i] - s) / l.get(i, i);
    }
    x
}

/// Symmetric positive-definite covariance matrix with its Cholesky factor,
/// determinant and trace computed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    matrix: SquareMatrix,
    chol: SquareMatrix,
    det: f64,
    trace: f64,
}

impl CovarianceMatrix {
    /// Validates and factors `m`.
    ///
    /// Asymmetry up to [`SYMMETRY_RTOL`] (relative to the largest entry) is
    /// removed by averaging with the transpose; anything larger is rejected.
    pub fn new(m: SquareMatrix) -> Result<Self> {
        let (row, col, gap) = m.worst_asymmetry();
        if gap > SYMMETRY_RTOL * m.max_abs() {
            return Err(Error::NotSymmetric { row, col, gap });
        }
        let matrix = m.symmetrized();
        let max_diag = matrix.diag().fold(0.0, f64::max);
        let chol = cholesky(&matrix, PIVOT_RTOL * max_diag)?;
        let det = chol.diag().product::<f64>().powi(2);
        let trace = matrix.diag().sum();
        Ok(CovarianceMatrix { matrix, chol, det, trace })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(SquareMatrix::from_rows(rows)?)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(SquareMatrix::identity(dim)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix.get(row, col)
    }

    /// Lower-triangular `L` with `Σ = L Lᵀ`.
    pub fn cholesky_factor(&self) -> &SquareMatrix {
        &self.chol
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Product of the diagonal entries (the Hadamard upper bound on `det`).
    pub fn diag_product(&self) -> f64 {
        self.matrix.diag().product()
    }

    /// `L⁻¹ d`: maps a deviation into coordinates where the covariance is
    /// the identity, so its squared norm is the Mahalanobis distance.
    pub fn whiten(&self, d: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), d.len())?;
        Ok(forward_substitute(&self.chol, d))
    }

    /// `L v`: inverse of [`whiten`](Self::whiten).
    pub fn color(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.chol.mul_vec(v)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::NonPositiveParameter { name: "scale", value: c });
        }
        Self::new(self.matrix.scale(c))
    }
}

impl TryFrom<SquareMatrix> for CovarianceMatrix {
    type Error = Error;

    fn try_from(m: SquareMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl Serialize for CovarianceMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.matrix.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CovarianceMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let m = SquareMatrix::deserialize(deserializer)?;
        CovarianceMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Inverse of a covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    matrix: SquareMatrix,
}

impl PrecisionMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix.get(row, col)
    }
}

impl Serialize for PrecisionMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.matrix.serialize(serializer)
    }
}

/// `Σ⁻¹` by solving `L Lᵀ X = I` one column at a time.
pub fn invert_spd(c: &CovarianceMatrix) -> PrecisionMatrix {
    let n = c.dim();
    let l = c.cholesky_factor();
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = back_substitute(l, &forward_substitute(l, &e));
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    let matrix = SquareMatrix { dim: n, entries: inv }.symmetrized();
    PrecisionMatrix { matrix }
}

pub fn det_spd(c: &CovarianceMatrix) -> f64 {
    c.det()
}

pub fn trace(c: &CovarianceMatrix) -> f64 {
    c.trace()
}

/// `dᵀ P d`, clamped at zero against rounding for near-zero `d`.
pub fn quad_form(d: &[f64], p: &PrecisionMatrix) -> Result<f64> {
    check_dim(p.dim(), d.len())?;
    let n = d.len();
    let mut acc = 0.0;
    for i in 0..n {
        let row = p.matrix.row(i);
        let inner: f64 = row.iter().zip(d).map(|(r, u)| r * u).sum();
        acc += d[i] * inner;
    }
    Ok(acc.max(0.0))
}
