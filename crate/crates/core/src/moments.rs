//! Mean and covariance estimation, plus the analytic covariance of the
//! two-dimensional `(y, y + z)` example.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CovarianceMatrix, SquareMatrix, Vector};

/// N samples in R^n, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot form rows of length {dim}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(SampleSet { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptySampleSet)?;
        if let Some(r) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "row {r} has {} values, expected {dim}",
                rows[r].len()
            )));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Appends all rows of `other`.
    pub fn extend(&mut self, other: &SampleSet) -> Result<()> {
        crate::linalg::check_dim(self.dim, other.dim)?;
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    /// Reads the CSV format: a header row (`x1,...,xn`) followed by one
    /// sample per line. Ragged rows are rejected with their line number.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let dim = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.len();
        if dim == 0 {
            return Err(Error::EmptySampleSet);
        }
        let mut data = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Csv(e.to_string()))?;
            let line = record.position().map_or(i as u64 + 2, |p| p.line());
            if record.len() != dim {
                return Err(Error::Csv(format!(
                    "line {line}: expected {dim} fields, found {}",
                    record.len()
                )));
            }
            for field in &record {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Csv(format!("line {line}: cannot parse `{field}` as a number")))?;
                if !v.is_finite() {
                    return Err(Error::Csv(format!("line {line}: non-finite value `{field}`")));
                }
                data.push(v);
            }
        }
        if data.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        Self::new(dim, data)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
        for row in self.rows() {
            w.write_record(row.iter().map(f64::to_string)).map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))
    }
}

/// Divisor convention for the sample covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Ddof {
    /// Divide by N.
    Population,
    /// Divide by N - 1.
    #[default]
    Unbiased,
}

impl Ddof {
    pub fn as_u8(self) -> u8 {
        match self {
            Ddof::Population => 0,
            Ddof::Unbiased => 1,
        }
    }
}

impl From<Ddof> for u8 {
    fn from(d: Ddof) -> u8 {
        d.as_u8()
    }
}

impl TryFrom<u8> for Ddof {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Ddof::Population),
            1 => Ok(Ddof::Unbiased),
            _ => Err(Error::InvalidArgument(format!("ddof must be 0 or 1, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub mean: Vector,
    pub cov: CovarianceMatrix,
    pub ddof: Ddof,
}

pub fn sample_mean(s: &SampleSet) -> Result<Vector> {
    if s.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let n = s.len() as f64;
    let mut mean = vec![0.0; s.dim()];
    for row in s.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    Vector::new(mean)
}

/// Two-pass sample covariance with an optional ridge `λ·I` added before
/// the positive-definiteness check.
pub fn sample_covariance(s: &SampleSet, ddof: Ddof, ridge: f64) -> Result<CovarianceMatrix> {
    Ok(estimate(s, ddof, ridge)?.cov)
}

pub fn estimate(s: &SampleSet, ddof: Ddof, ridge: f64) -> Result<MomentEstimate> {
    let needed = 1 + ddof.as_u8() as usize;
    if s.len() < needed {
        return Err(if s.is_empty() {
            Error::EmptySampleSet
        } else {
            Error::InsufficientSamples { needed, got: s.len() }
        });
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidArgument(format!("ridge must be a finite value >= 0, got {ridge}")));
    }
    let mean = sample_mean(s)?;
    let n = s.dim();
    let mut acc = vec![0.0; n * n];
    let mut dev = vec![0.0; n];
    for row in s.rows() {
        for ((d, v), m) in dev.iter_mut().zip(row).zip(mean.iter()) {
            *d = v - m;
        }
        for i in 0..n {
            for j in 0..=i {
                acc[i * n + j] += dev[i] * dev[j];
            }
        }
    }
    let divisor = (s.len() - ddof.as_u8() as usize) as f64;
    for i in 0..n {
        for j in 0..=i {
            let v = acc[i * n + j] / divisor;
            acc[i * n + j] = v;
            acc[j * n + i] = v;
        }
        acc[i * n + i] += ridge;
    }
    let cov = CovarianceMatrix::new(SquareMatrix::from_row_major(n, acc)?)?;
    Ok(MomentEstimate { mean, cov, ddof })
}

/// Covariance of `(y, y + z)` with `y ~ N(0, σ²)`, `z ~ N(0, kσ²)`:
/// `[[σ², σ²], [σ², (k+1)σ²]]`.
pub fn example_covariance(sigma: f64, k: f64) -> Result<CovarianceMatrix> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveParameter { name: "sigma", value: sigma });
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::NonPositiveParameter { name: "k", value: k });
    }
    let s2 = sigma * sigma;
    CovarianceMatrix::from_rows(&[vec![s2, s2], vec![s2, (k + 1.0) * s2]])
}
