//! Monte Carlo checks of both tail bounds and of region coverage.
//!
//! Every experiment splits its N samples into fixed chunks of
//! [`CHUNK_SIZE`]; chunk `c` is drawn from random stream `c`. Workers take
//! chunks round-robin and per-chunk results are reduced in chunk order, so
//! the output is bitwise identical for any worker count.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{invert_spd, CovarianceMatrix, Vector};
use crate::moments::{estimate, Ddof, MomentEstimate, SampleSet};
use crate::regions::{
    circle_boundary, ellipse_boundary, make_ellipsoid, make_sphere, mahalanobis_sq, reaches, EllipsoidRegion,
    SphereRegion,
};
use crate::sampler::{draw, SamplerKind, SamplerSpec};

pub const CHUNK_SIZE: usize = 4096;

/// Number of standard errors allowed in statistical checks.
pub const SE_MULTIPLIER: f64 = 5.0;

/// Runs `f` on every chunk of an `n_samples` draw and returns the results in
/// chunk order.
pub fn map_chunks<T, F>(spec: &SamplerSpec, n_samples: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SampleSet) -> Result<T> + Sync,
{
    if n_samples == 0 {
        return Err(Error::InvalidSpec("sample count must be positive".into()));
    }
    if workers == 0 {
        return Err(Error::InvalidArgument("worker count must be at least 1".into()));
    }
    let n_chunks = n_samples.div_ceil(CHUNK_SIZE);
    let chunk_len = |c: usize| CHUNK_SIZE.min(n_samples - c * CHUNK_SIZE);
    let run = |c: usize| draw(spec, chunk_len(c), c as u64).and_then(|s| f(&s));

    let workers = workers.min(n_chunks);
    if workers == 1 {
        return (0..n_chunks).map(run).collect();
    }
    let per_worker: Vec<Vec<(usize, Result<T>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let run = &run;
                scope.spawn(move || (w..n_chunks).step_by(workers).map(|c| (c, run(c))).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut slots: Vec<Option<Result<T>>> = (0..n_chunks).map(|_| None).collect();
    for (c, r) in per_worker.into_iter().flatten() {
        slots[c] = Some(r);
    }
    slots.into_iter().map(|s| s.expect("every chunk visited")).collect()
}

/// All `n_samples` rows of a chunked draw, concatenated in chunk order.
pub fn collect_samples(spec: &SamplerSpec, n_samples: usize, workers: usize) -> Result<SampleSet> {
    let mut chunks = map_chunks(spec, n_samples, workers, |s| Ok(s.clone()))?.into_iter();
    let mut all = chunks.next().expect("at least one chunk");
    for c in chunks {
        all.extend(&c)?;
    }
    Ok(all)
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub region: String,
    pub delta: f64,
    pub n_samples: usize,
    /// Samples inside the closed region.
    pub hits: u64,
    pub empirical_coverage: f64,
    pub guaranteed_coverage: f64,
    pub standard_error: f64,
    /// Samples strictly inside (boundary excluded). Differs from `hits`
    /// only for distributions with mass on the boundary.
    pub interior_hits: u64,
    pub interior_coverage: f64,
}

impl CoverageReport {
    fn new(region: &str, delta: f64, n_samples: usize, hits: u64, interior_hits: u64) -> Self {
        let p = hits as f64 / n_samples as f64;
        CoverageReport {
            region: region.to_string(),
            delta,
            n_samples,
            hits,
            empirical_coverage: p,
            guaranteed_coverage: 1.0 - delta,
            standard_error: binomial_se(p, n_samples),
            interior_hits,
            interior_coverage: interior_hits as f64 / n_samples as f64,
        }
    }

    /// `empirical ≥ guaranteed − 5·SE`.
    pub fn meets_guarantee(&self) -> bool {
        self.empirical_coverage >= self.guaranteed_coverage - SE_MULTIPLIER * self.standard_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePair {
    pub ellipsoid: CoverageReport,
    pub sphere: CoverageReport,
}

#[derive(Default, Clone, Copy)]
struct CoverageCounts {
    ellipsoid: u64,
    ellipsoid_interior: u64,
    sphere: u64,
    sphere_interior: u64,
}

fn count_coverage(s: &SampleSet, e: &EllipsoidRegion, b: &SphereRegion) -> Result<CoverageCounts> {
    let mut c = CoverageCounts::default();
    for row in s.rows() {
        let d2 = e.distance_sq(row)?;
        c.ellipsoid += u64::from(e.contains(row)?);
        c.ellipsoid_interior += u64::from(!reaches(d2, e.threshold()));
        let r2 = b.distance_sq(row)?;
        c.sphere += u64::from(b.contains(row)?);
        c.sphere_interior += u64::from(!reaches(r2, b.radius_sq()));
    }
    Ok(c)
}

fn coverage_pair(delta: f64, n_samples: usize, counts: impl Iterator<Item = CoverageCounts>) -> CoveragePair {
    let t = counts.fold(CoverageCounts::default(), |a, c| CoverageCounts {
        ellipsoid: a.ellipsoid + c.ellipsoid,
        ellipsoid_interior: a.ellipsoid_interior + c.ellipsoid_interior,
        sphere: a.sphere + c.sphere,
        sphere_interior: a.sphere_interior + c.sphere_interior,
    });
    CoveragePair {
        ellipsoid: CoverageReport::new("ellipsoid", delta, n_samples, t.ellipsoid, t.ellipsoid_interior),
        sphere: CoverageReport::new("sphere", delta, n_samples, t.sphere, t.sphere_interior),
    }
}

/// Counts how many draws fall in `E_δ` and `B_δ` built from the supplied
/// (true) moments. Both regions are scored on the same samples.
pub fn run_coverage(
    spec: &SamplerSpec,
    delta: f64,
    n_samples: usize,
    true_mean: &Vector,
    true_cov: &CovarianceMatrix,
    workers: usize,
) -> Result<CoveragePair> {
    let e = make_ellipsoid(true_mean, true_cov, delta)?;
    let b = make_sphere(true_mean, true_cov, delta)?;
    if spec.dim() != e.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: e.dim() });
    }
    let counts = map_chunks(spec, n_samples, workers, |s| count_coverage(s, &e, &b))?;
    Ok(coverage_pair(delta, n_samples, counts.into_iter()))
}

/// Like [`run_coverage`], but the regions are built from moments re-fitted
/// (unbiased) to the same samples.
pub fn run_coverage_estimated(
    spec: &SamplerSpec,
    delta: f64,
    n_samples: usize,
    workers: usize,
) -> Result<(MomentEstimate, CoveragePair)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    let samples = collect_samples(spec, n_samples, workers)?;
    let fit = estimate(&samples, Ddof::Unbiased, 0.0)?;
    let e = make_ellipsoid(&fit.mean, &fit.cov, delta)?;
    let b = make_sphere(&fit.mean, &fit.cov, delta)?;
    let counts = count_coverage(&samples, &e, &b)?;
    Ok((fit, coverage_pair(delta, n_samples, std::iter::once(counts))))
}

/// Exact `Var(d²)` where known: `2n` for Gaussians (chi-square), and
/// `n·eps − n²` for the two-point radial law.
pub fn mahalanobis_variance(spec: &SamplerSpec) -> f64 {
    let n = spec.dim() as f64;
    match spec.kind() {
        SamplerKind::Gaussian { .. } | SamplerKind::PaperExample { .. } => 2.0 * n,
        SamplerKind::TightRadial { eps, .. } => n * eps - n * n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceIdentityReport {
    pub dim: usize,
    pub n_samples: usize,
    /// Sample mean of `d²`; should be close to `dim`.
    pub mean_d2: f64,
    pub sample_variance_d2: f64,
    /// `√(Var(d²)/N)` with the exact variance.
    pub standard_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Mean Mahalanobis distance under the true moments, compared with `n`.
pub fn trace_identity_check(spec: &SamplerSpec, n_samples: usize, workers: usize) -> Result<TraceIdentityReport> {
    let (mean, cov) = spec.true_moments();
    let p = invert_spd(&cov);
    let sums = map_chunks(spec, n_samples, workers, |s| {
        s.rows().try_fold((0.0, 0.0), |(a, b), row| {
            let d2 = mahalanobis_sq(row, &mean, &p)?;
            Ok((a + d2, b + d2 * d2))
        })
    })?;
    let (sum, sum_sq) = sums.into_iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let n = n_samples as f64;
    let mean_d2 = sum / n;
    let sample_variance_d2 = if n_samples > 1 { (sum_sq - n * mean_d2 * mean_d2) / (n - 1.0) } else { 0.0 };
    let standard_error = (mahalanobis_variance(spec) / n).sqrt();
    let tolerance = SE_MULTIPLIER * standard_error;
    let dim = spec.dim();
    Ok(TraceIdentityReport {
        dim,
        n_samples,
        mean_d2,
        sample_variance_d2,
        standard_error,
        tolerance,
        passed: (mean_d2 - dim as f64).abs() <= tolerance,
    })
}

/// Empirical tails against both bounds on a grid of levels `ε`.
///
/// The classical column uses the matching sphere event
/// `‖X−μ‖² ≥ ε·tr(Σ)/n`, whose Chebyshev bound is also `n/ε`; at `ε = n/δ`
/// the two events are exactly the complements of `E_δ` and `B_δ`. For
/// `n = 1` this is the scalar Chebyshev inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub dim: usize,
    pub n_samples: usize,
    pub eps_grid: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub new_bound: Vec<f64>,
    pub classical_radius_sq: Vec<f64>,
    pub classical_tail: Vec<f64>,
    pub classical_standard_error: Vec<f64>,
    pub classical_bound: Vec<f64>,
}

impl TailCurve {
    /// True if every empirical tail is within 5·SE of its clamped bound.
    pub fn bounds_hold(&self) -> bool {
        let ok = |tail: &[f64], se: &[f64], bound: &[f64]| {
            tail.iter().zip(se).zip(bound).all(|((t, s), b)| *t <= b + SE_MULTIPLIER * s)
        };
        ok(&self.empirical_tail, &self.standard_error, &self.new_bound)
            && ok(&self.classical_tail, &self.classical_standard_error, &self.classical_bound)
    }
}

/// `[n, 2n, 5n, 10n, 20n]`.
pub fn default_eps_grid(n: usize) -> Vec<f64> {
    [1.0, 2.0, 5.0, 10.0, 20.0].iter().map(|m| m * n as f64).collect()
}

pub fn run_tail_curve(spec: &SamplerSpec, eps_grid: &[f64], n_samples: usize, workers: usize) -> Result<TailCurve> {
    if eps_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !eps_grid.iter().all(|e| *e > 0.0 && e.is_finite()) || eps_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadGrid);
    }
    let (mean, cov) = spec.true_moments();
    let p = invert_spd(&cov);
    let n = spec.dim();
    let radius_sq: Vec<f64> = eps_grid.iter().map(|e| e * cov.trace() / n as f64).collect();
    let counts = map_chunks(spec, n_samples, workers, |s| {
        let mut new = vec![0u64; eps_grid.len()];
        let mut classical = vec![0u64; eps_grid.len()];
        for row in s.rows() {
            let d2 = mahalanobis_sq(row, &mean, &p)?;
            let r2: f64 = row.iter().zip(mean.iter()).map(|(x, m)| (x - m) * (x - m)).sum();
            for (i, eps) in eps_grid.iter().enumerate() {
                new[i] += u64::from(reaches(d2, *eps));
                classical[i] += u64::from(reaches(r2, radius_sq[i]));
            }
        }
        Ok((new, classical))
    })?;
    let mut new = vec![0u64; eps_grid.len()];
    let mut classical = vec![0u64; eps_grid.len()];
    for (a, b) in counts {
        new.iter_mut().zip(a).for_each(|(t, v)| *t += v);
        classical.iter_mut().zip(b).for_each(|(t, v)| *t += v);
    }
    let frac = |c: &[u64]| c.iter().map(|h| *h as f64 / n_samples as f64).collect::<Vec<_>>();
    let empirical_tail = frac(&new);
    let classical_tail = frac(&classical);
    let se = |t: &[f64]| t.iter().map(|p| binomial_se(*p, n_samples)).collect::<Vec<_>>();
    Ok(TailCurve {
        dim: n,
        n_samples,
        eps_grid: eps_grid.to_vec(),
        standard_error: se(&empirical_tail),
        classical_standard_error: se(&classical_tail),
        empirical_tail,
        classical_tail,
        new_bound: eps_grid
            .iter()
            .map(|e| crate::regions::chebyshev_bound(n, *e).map(|b| b.clamped))
            .collect::<Result<_>>()?,
        classical_bound: radius_sq
            .iter()
            .map(|r2| crate::regions::classical_bound(cov.trace(), r2.sqrt()).map(|b| b.clamped))
            .collect::<Result<_>>()?,
        classical_radius_sq: radius_sq,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureParams {
    pub sigma: f64,
    pub k: f64,
    pub delta: f64,
    pub seed: u64,
    pub n_samples: usize,
    pub boundary_points: usize,
}

impl Default for FigureParams {
    fn default() -> Self {
        FigureParams { sigma: 1.0, k: 25.0, delta: 0.1, seed: 0, n_samples: 1000, boundary_points: 256 }
    }
}

/// Samples and region outlines for the two-dimensional example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureData {
    pub params: FigureParams,
    pub threshold: f64,
    pub radius_sq: f64,
    pub volume_ratio: f64,
    pub ellipse_hits: u64,
    pub circle_hits: u64,
    pub samples: Vec<[f64; 2]>,
    pub ellipse_boundary: Vec<[f64; 2]>,
    pub circle_boundary: Vec<[f64; 2]>,
}

pub fn export_figure(params: &FigureParams) -> Result<FigureData> {
    let spec = SamplerSpec::paper_example(params.sigma, params.k, params.seed)?;
    let (mean, cov) = spec.true_moments();
    let e = make_ellipsoid(&mean, &cov, params.delta)?;
    let b = make_sphere(&mean, &cov, params.delta)?;
    let ellipse = ellipse_boundary(&e, params.boundary_points)?;
    let circle = circle_boundary(&b, params.boundary_points)?;
    let samples = collect_samples(&spec, params.n_samples, 1)?;
    let counts = count_coverage(&samples, &e, &b)?;
    Ok(FigureData {
        params: params.clone(),
        threshold: e.threshold(),
        radius_sq: b.radius_sq(),
        volume_ratio: crate::regions::volume_ratio(&cov),
        ellipse_hits: counts.ellipsoid,
        circle_hits: counts.sphere,
        samples: samples.rows().map(|r| [r[0], r[1]]).collect(),
        ellipse_boundary: ellipse,
        circle_boundary: circle,
    })
}

/// Two-column `x,y` CSV with header.
pub fn write_points_csv<W: Write>(points: &[[f64; 2]], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(["x", "y"]).map_err(csv_err)?;
    for p in points {
        w.write_record([p[0].to_string(), p[1].to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}
