//! Seeded random-vector generators.
//!
//! Uniforms come from ChaCha8, a counter-based generator: `(seed,
//! stream_index)` selects an independent keystream, so parallel workers
//! can each own a stream and still reproduce a serial run exactly.

use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CovarianceMatrix, SquareMatrix, Vector};
use crate::moments::{example_covariance, SampleSet};

/// One deterministic stream of uniforms and standard normals.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream_index: u64,
    position: u64,
    spare: Option<f64>,
}

impl RandomStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        RandomStream { rng, seed, stream_index, position: 0, spare: None }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Number of 64-bit words consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Uniform on the open interval (0, 1) with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        self.position += 1;
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box–Muller; the second variate of each pair is
    /// kept and returned by the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// Which distribution to draw from.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplerKind {
    /// `mean + L z`, `z` standard normal, `L Lᵀ = cov`.
    Gaussian { mean: Vector, cov: CovarianceMatrix },
    /// `(y, y + z)` with `y ~ N(0, σ²)`, `z ~ N(0, kσ²)`.
    PaperExample { sigma: f64, k: f64 },
    /// `mean + R L u` with `u` uniform on the unit sphere and `R² = eps`
    /// with probability `n/eps`, otherwise `R = 0`. Its Mahalanobis
    /// distance reaches `eps` with probability exactly `n/eps`, and its
    /// covariance is `cov`.
    TightRadial { mean: Vector, cov: CovarianceMatrix, eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    kind: SamplerKind,
    seed: u64,
}

impl SamplerSpec {
    pub fn gaussian(mean: Vector, cov: CovarianceMatrix, seed: u64) -> Result<Self> {
        if mean.dim() != cov.dim() {
            return Err(Error::InvalidSpec(format!(
                "mean has dimension {}, covariance has {}",
                mean.dim(),
                cov.dim()
            )));
        }
        Ok(SamplerSpec { kind: SamplerKind::Gaussian { mean, cov }, seed })
    }

    pub fn paper_example(sigma: f64, k: f64, seed: u64) -> Result<Self> {
        example_covariance(sigma, k).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        Ok(SamplerSpec { kind: SamplerKind::PaperExample { sigma, k }, seed })
    }

    pub fn tight_radial(mean: Vector, cov: CovarianceMatrix, eps: f64, seed: u64) -> Result<Self> {
        if mean.dim() != cov.dim() {
            return Err(Error::InvalidSpec(format!(
                "mean has dimension {}, covariance has {}",
                mean.dim(),
                cov.dim()
            )));
        }
        let n = cov.dim() as f64;
        if !(eps >= n) || !eps.is_finite() {
            return Err(Error::InvalidSpec(format!("tight_radial needs eps >= n = {n}, got {eps}")));
        }
        Ok(SamplerSpec { kind: SamplerKind::TightRadial { mean, cov, eps }, seed })
    }

    pub fn kind(&self) -> &SamplerKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SamplerKind::Gaussian { .. } => "gaussian",
            SamplerKind::PaperExample { .. } => "paper_example",
            SamplerKind::TightRadial { .. } => "tight_radial",
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SamplerKind::Gaussian { mean, .. } | SamplerKind::TightRadial { mean, .. } => mean.dim(),
            SamplerKind::PaperExample { .. } => 2,
        }
    }

    /// Exact mean and covariance of the distribution.
    pub fn true_moments(&self) -> (Vector, CovarianceMatrix) {
        match &self.kind {
            SamplerKind::Gaussian { mean, cov } | SamplerKind::TightRadial { mean, cov, .. } => {
                (mean.clone(), cov.clone())
            }
            SamplerKind::PaperExample { sigma, k } => {
                (Vector::zeros(2), example_covariance(*sigma, *k).expect("validated at construction"))
            }
        }
    }

    fn fill_sample(&self, stream: &mut RandomStream, out: &mut Vec<f64>) {
        match &self.kind {
            SamplerKind::Gaussian { mean, cov } => {
                let z: Vec<f64> = (0..mean.dim()).map(|_| stream.standard_normal()).collect();
                let lz = cov.color(&z).expect("dimension checked at construction");
                out.extend(mean.iter().zip(lz).map(|(m, v)| m + v));
            }
            SamplerKind::PaperExample { sigma, k } => {
                let y = sigma * stream.standard_normal();
                let z = sigma * k.sqrt() * stream.standard_normal();
                out.push(y);
                out.push(y + z);
            }
            SamplerKind::TightRadial { mean, cov, eps } => {
                let n = mean.dim();
                let on_shell = stream.uniform() < n as f64 / eps;
                let mut g: Vec<f64> = (0..n).map(|_| stream.standard_normal()).collect();
                let mut norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                while norm == 0.0 {
                    g.iter_mut().for_each(|v| *v = stream.standard_normal());
                    norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                }
                if on_shell {
                    let r = eps.sqrt() / norm;
                    g.iter_mut().for_each(|v| *v *= r);
                    let lg = cov.color(&g).expect("dimension checked at construction");
                    out.extend(mean.iter().zip(lg).map(|(m, v)| m + v));
                } else {
                    out.extend_from_slice(mean);
                }
            }
        }
    }
}

/// Draws `n_samples` vectors from stream `stream_index` of the spec's seed.
pub fn draw(spec: &SamplerSpec, n_samples: usize, stream_index: u64) -> Result<SampleSet> {
    if n_samples == 0 {
        return Err(Error::InvalidSpec("sample count must be positive".into()));
    }
    let mut stream = RandomStream::new(spec.seed, stream_index);
    let mut data = Vec::with_capacity(n_samples * spec.dim());
    for _ in 0..n_samples {
        spec.fill_sample(&mut stream, &mut data);
    }
    SampleSet::new(spec.dim(), data)
}

/// JSON form, e.g. `{"kind":"paper_example","sigma":1.0,"k":25.0,"seed":42}`.
///
/// `mean` defaults to the origin. `tight_radial` accepts either `cov` or a
/// bare `dim` (identity covariance).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SpecWire {
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        cov: SquareMatrix,
        #[serde(default)]
        seed: u64,
    },
    PaperExample {
        sigma: f64,
        k: f64,
        #[serde(default)]
        seed: u64,
    },
    TightRadial {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cov: Option<SquareMatrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        eps: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn spec_error(e: Error) -> Error {
    match e {
        Error::InvalidSpec(_) => e,
        other => Error::InvalidSpec(other.to_string()),
    }
}

fn mean_or_origin(mean: Option<Vec<f64>>, dim: usize) -> Result<Vector> {
    match mean {
        Some(m) => Vector::new(m).map_err(spec_error),
        None => Ok(Vector::zeros(dim)),
    }
}

impl TryFrom<SpecWire> for SamplerSpec {
    type Error = Error;

    fn try_from(w: SpecWire) -> Result<Self> {
        match w {
            SpecWire::Gaussian { mean, cov, seed } => {
                let cov = CovarianceMatrix::new(cov).map_err(spec_error)?;
                let mean = mean_or_origin(mean, cov.dim())?;
                SamplerSpec::gaussian(mean, cov, seed)
            }
            SpecWire::PaperExample { sigma, k, seed } => SamplerSpec::paper_example(sigma, k, seed),
            SpecWire::TightRadial { mean, cov, dim, eps, seed } => {
                let cov = match (cov, dim) {
                    (Some(c), None) => CovarianceMatrix::new(c).map_err(spec_error)?,
                    (Some(c), Some(d)) if c.dim() == d => CovarianceMatrix::new(c).map_err(spec_error)?,
                    (None, Some(d)) if d > 0 => CovarianceMatrix::identity(d),
                    _ => return Err(Error::InvalidSpec("tight_radial needs `cov` or a positive `dim`".into())),
                };
                let mean = mean_or_origin(mean, cov.dim())?;
                SamplerSpec::tight_radial(mean, cov, eps, seed)
            }
        }
    }
}

impl From<&SamplerSpec> for SpecWire {
    fn from(s: &SamplerSpec) -> Self {
        match &s.kind {
            SamplerKind::Gaussian { mean, cov } => SpecWire::Gaussian {
                mean: Some(mean.to_vec()),
                cov: cov.matrix().clone(),
                seed: s.seed,
            },
            SamplerKind::PaperExample { sigma, k } => SpecWire::PaperExample { sigma: *sigma, k: *k, seed: s.seed },
            SamplerKind::TightRadial { mean, cov, eps } => SpecWire::TightRadial {
                mean: Some(mean.to_vec()),
                cov: Some(cov.matrix().clone()),
                dim: None,
                eps: *eps,
                seed: s.seed,
            },
        }
    }
}

impl Serialize for SamplerSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SpecWire::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SamplerSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = SpecWire::deserialize(deserializer)?;
        SamplerSpec::try_from(wire).map_err(serde::de::Error::custom)
    }
}

impl SamplerSpec {
    /// Parses the JSON form, mapping every failure to [`Error::InvalidSpec`].
    pub fn from_json(text: &str) -> Result<Self> {
        let wire: SpecWire = serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        SamplerSpec::try_from(wire)
    }
}
