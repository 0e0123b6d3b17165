//! Chebyshev tail bounds and the confidence regions built from them.
//!
//! For a random vector with mean `μ` and covariance `Σ`, and a miss
//! probability `δ ∈ (0, 1)`:
//!
//! * the classical bound `Pr{‖X−μ‖ ≥ ε} ≤ tr(Σ)/ε²` yields the sphere
//!   `B_δ = {v : ‖v−μ‖² ≤ tr(Σ)/δ}`;
//! * the Mahalanobis bound `Pr{(X−μ)ᵀΣ⁻¹(X−μ) ≥ ε} ≤ n/ε` yields the
//!   ellipsoid `E_δ = {v : (v−μ)ᵀΣ⁻¹(v−μ) ≤ n/δ}`.
//!
//! Both regions cover X with probability at least `1 − δ`. Their volume
//! ratio `(tr(Σ)/n)^(n/2) / √det(Σ)` does not depend on `δ` and is never
//! below one.
//!
//! Regions are closed. Membership and tail tests allow a relative slack of
//! [`BOUNDARY_RTOL`] so that points constructed on a boundary (ellipse
//! outlines, shell samples) are classified as on it despite rounding.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, check_dim, CovarianceMatrix, PrecisionMatrix, SquareMatrix, Vector};
use crate::special::unit_ball_volume;

pub const BOUNDARY_RTOL: f64 = 1e-9;

/// `value ≤ level`, counting rounding-level overshoot as on the boundary.
pub fn within(value: f64, level: f64) -> bool {
    value <= level * (1.0 + BOUNDARY_RTOL)
}

/// `value ≥ level`, counting rounding-level undershoot as on the boundary.
pub fn reaches(value: f64, level: f64) -> bool {
    value >= level * (1.0 - BOUNDARY_RTOL)
}

pub fn mahalanobis_sq(x: &[f64], center: &[f64], p: &PrecisionMatrix) -> Result<f64> {
    check_dim(center.len(), x.len())?;
    check_dim(p.dim(), x.len())?;
    let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
    linalg::quad_form(&d, p)
}

/// Right-hand side of a tail bound, before and after capping at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub raw: f64,
    pub clamped: f64,
}

impl BoundValue {
    fn new(raw: f64) -> Self {
        BoundValue { raw, clamped: raw.min(1.0) }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveEpsilon(eps))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::DeltaOutOfRange(delta))
    }
}

/// `Pr{(X−μ)ᵀΣ⁻¹(X−μ) ≥ eps} ≤ n / eps`.
pub fn chebyshev_bound(n: usize, eps: f64) -> Result<BoundValue> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    check_eps(eps)?;
    Ok(BoundValue::new(n as f64 / eps))
}

/// `Pr{‖X−μ‖ ≥ eps} ≤ var_total / eps²`, with `var_total = tr(Σ)`.
pub fn classical_bound(var_total: f64, eps: f64) -> Result<BoundValue> {
    if !(var_total > 0.0) || !var_total.is_finite() {
        return Err(Error::NonPositiveVariance(var_total));
    }
    check_eps(eps)?;
    Ok(BoundValue::new(var_total / (eps * eps)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidRegion {
    center: Vector,
    cov: CovarianceMatrix,
    precision: PrecisionMatrix,
    delta: f64,
    threshold: f64,
}

impl EllipsoidRegion {
    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn cov(&self) -> &CovarianceMatrix {
        &self.cov
    }

    pub fn precision(&self) -> &PrecisionMatrix {
        &self.precision
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `n / δ`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn distance_sq(&self, x: &[f64]) -> Result<f64> {
        mahalanobis_sq(x, &self.center, &self.precision)
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(within(self.distance_sq(x)?, self.threshold))
    }

    /// `√det(Σ) · V_n · threshold^(n/2)`.
    pub fn volume(&self) -> f64 {
        let n = self.dim();
        self.cov.det().sqrt() * unit_ball_volume(n) * self.threshold.powf(n as f64 / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereRegion {
    center: Vector,
    radius_sq: f64,
}

impl SphereRegion {
    pub fn new(center: Vector, radius_sq: f64) -> Result<Self> {
        if !(radius_sq > 0.0) || !radius_sq.is_finite() {
            return Err(Error::InvalidRegion(format!("radius_sq must be positive, got {radius_sq}")));
        }
        Ok(SphereRegion { center, radius_sq })
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    /// `tr(Σ) / δ`.
    pub fn radius_sq(&self) -> f64 {
        self.radius_sq
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn distance_sq(&self, x: &[f64]) -> Result<f64> {
        Ok(Vector::new(x.to_vec())?.sub(&self.center)?.norm_sq())
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(within(self.distance_sq(x)?, self.radius_sq))
    }

    pub fn volume(&self) -> f64 {
        let n = self.dim();
        unit_ball_volume(n) * self.radius_sq.powf(n as f64 / 2.0)
    }
}

pub fn make_ellipsoid(mean: &Vector, cov: &CovarianceMatrix, delta: f64) -> Result<EllipsoidRegion> {
    check_delta(delta)?;
    check_dim(cov.dim(), mean.dim())?;
    Ok(EllipsoidRegion {
        center: mean.clone(),
        cov: cov.clone(),
        precision: linalg::invert_spd(cov),
        delta,
        threshold: cov.dim() as f64 / delta,
    })
}

pub fn make_sphere(mean: &Vector, cov: &CovarianceMatrix, delta: f64) -> Result<SphereRegion> {
    check_delta(delta)?;
    check_dim(cov.dim(), mean.dim())?;
    SphereRegion::new(mean.clone(), cov.trace() / delta)
}

/// Either confidence region, as read from or written to JSON.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Ellipsoid(EllipsoidRegion),
    Sphere(SphereRegion),
}

impl Region {
    pub fn kind(&self) -> &'static str {
        match self {
            Region::Ellipsoid(_) => "ellipsoid",
            Region::Sphere(_) => "sphere",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ellipsoid(e) => e.dim(),
            Region::Sphere(s) => s.dim(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        match self {
            Region::Ellipsoid(e) => e.contains(x),
            Region::Sphere(s) => s.contains(x),
        }
    }

    pub fn distance_sq(&self, x: &[f64]) -> Result<f64> {
        match self {
            Region::Ellipsoid(e) => e.distance_sq(x),
            Region::Sphere(s) => s.distance_sq(x),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Region::Ellipsoid(e) => e.volume(),
            Region::Sphere(s) => s.volume(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RegionWire {
    Ellipsoid {
        center: Vector,
        cov: SquareMatrix,
        delta: f64,
        #[serde(default)]
        threshold: Option<f64>,
    },
    Sphere {
        center: Vector,
        radius_sq: f64,
    },
}

impl Serialize for Region {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let wire = match self {
            Region::Ellipsoid(e) => RegionWire::Ellipsoid {
                center: e.center.clone(),
                cov: e.cov.matrix().clone(),
                delta: e.delta,
                threshold: Some(e.threshold),
            },
            Region::Sphere(s) => RegionWire::Sphere { center: s.center.clone(), radius_sq: s.radius_sq },
        };
        wire.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Region {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        match RegionWire::deserialize(deserializer)? {
            RegionWire::Ellipsoid { center, cov, delta, threshold } => {
                let cov = CovarianceMatrix::new(cov).map_err(D::Error::custom)?;
                let e = make_ellipsoid(&center, &cov, delta).map_err(D::Error::custom)?;
                if let Some(t) = threshold {
                    if (t - e.threshold).abs() > 1e-12 * e.threshold {
                        return Err(D::Error::custom(format!(
                            "threshold {t} disagrees with n/delta = {}",
                            e.threshold
                        )));
                    }
                }
                Ok(Region::Ellipsoid(e))
            }
            RegionWire::Sphere { center, radius_sq } => {
                SphereRegion::new(center, radius_sq).map(Region::Sphere).map_err(D::Error::custom)
            }
        }
    }
}

/// `vol(B_δ) / vol(E_δ) = (tr(Σ)/n)^(n/2) / √det(Σ)`.
pub fn volume_ratio(cov: &CovarianceMatrix) -> f64 {
    let n = cov.dim() as f64;
    (cov.trace() / n).powf(n / 2.0) / cov.det().sqrt()
}

/// Closed form of [`volume_ratio`] for the `(y, y + z)` example:
/// `(k + 2) / (2√k)`, minimised at `k = 2`.
pub fn example_ratio(k: f64) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::NonPositiveParameter { name: "k", value: k });
    }
    Ok((k + 2.0) / (2.0 * k.sqrt()))
}

fn unit_circle(m: usize) -> Result<impl Iterator<Item = (f64, f64)>> {
    if m < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 boundary points, got {m}")));
    }
    Ok((0..m).map(move |j| {
        let theta = 2.0 * PI * j as f64 / m as f64;
        (theta.cos(), theta.sin())
    }))
}

/// `m` points `μ + √threshold · L · (cos θ_j, sin θ_j)` on the boundary of a
/// 2-D ellipsoid, `θ_j = 2πj/m`.
pub fn ellipse_boundary(r: &EllipsoidRegion, m: usize) -> Result<Vec<[f64; 2]>> {
    if r.dim() != 2 {
        return Err(Error::UnsupportedDimension(r.dim()));
    }
    let l = r.cov.cholesky_factor();
    let scale = r.threshold.sqrt();
    let c = r.center.as_slice();
    Ok(unit_circle(m)?
        .map(|(x, y)| {
            [
                c[0] + scale * (l[(0, 0)] * x),
                c[1] + scale * (l[(1, 0)] * x + l[(1, 1)] * y),
            ]
        })
        .collect())
}

/// `m` points on the circle of a 2-D sphere region.
pub fn circle_boundary(r: &SphereRegion, m: usize) -> Result<Vec<[f64; 2]>> {
    if r.dim() != 2 {
        return Err(Error::UnsupportedDimension(r.dim()));
    }
    let radius = r.radius_sq.sqrt();
    let c = r.center.as_slice();
    Ok(unit_circle(m)?.map(|(x, y)| [c[0] + radius * x, c[1] + radius * y]).collect())
}
