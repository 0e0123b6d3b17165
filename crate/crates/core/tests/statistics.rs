//! Statistical checks of the samplers, estimators and Monte Carlo
//! experiments. Every tolerance is five standard errors.

use mvchebyshev::experiments::{
    export_figure, run_coverage, run_coverage_estimated, run_tail_curve, trace_identity_check, FigureParams,
};
use mvchebyshev::moments::{estimate, example_covariance, sample_covariance, sample_mean, Ddof};
use mvchebyshev::sampler::draw;
use mvchebyshev::{CovarianceMatrix, RandomStream, SampleSet, SamplerSpec, SquareMatrix, Vector};

const N: usize = 100_000;

/// Each covariance entry within 5 SE of `cov`, using the Gaussian
/// asymptotic variance `Var(x_i x_j) = σ_ii σ_jj + σ_ij²`.
fn assert_gaussian_moments(s: &SampleSet, mean: &[f64], cov: &CovarianceMatrix) {
    let n = s.len() as f64;
    let m = sample_mean(s).unwrap();
    for i in 0..cov.dim() {
        let se = (cov.get(i, i) / n).sqrt();
        assert!((m[i] - mean[i]).abs() <= 5.0 * se, "mean[{i}] = {}", m[i]);
    }
    let c = sample_covariance(s, Ddof::Unbiased, 0.0).unwrap();
    for i in 0..cov.dim() {
        for j in 0..cov.dim() {
            let se = ((cov.get(i, i) * cov.get(j, j) + cov.get(i, j).powi(2)) / n).sqrt();
            assert!(
                (c.get(i, j) - cov.get(i, j)).abs() <= 5.0 * se,
                "cov[{i}][{j}] = {} vs {}",
                c.get(i, j),
                cov.get(i, j)
            );
        }
    }
}

fn example() -> CovarianceMatrix {
    example_covariance(1.0, 25.0).unwrap()
}

#[test]
fn standard_normal_moments() {
    let n = 1_000_000;
    let mut s = RandomStream::new(2024, 0);
    let (mut sum, mut sum_sq, mut nonpos) = (0.0, 0.0, 0usize);
    for _ in 0..n {
        let z = s.standard_normal();
        sum += z;
        sum_sq += z * z;
        nonpos += usize::from(z <= 0.0);
    }
    let nf = n as f64;
    let mean = sum / nf;
    assert!(mean.abs() <= 5.0 / nf.sqrt(), "mean {mean}");
    // Var(z²) = 2 for a standard normal.
    let var = sum_sq / nf - mean * mean;
    assert!((var - 1.0).abs() <= 5.0 * (2.0 / nf).sqrt(), "var {var}");
    let frac = nonpos as f64 / nf;
    assert!((frac - 0.5).abs() <= 5.0 * (0.25 / nf).sqrt(), "frac {frac}");
}

#[test]
fn streams_are_uncorrelated() {
    let n = 1_000_000;
    let mut a = RandomStream::new(5, 0);
    let mut b = RandomStream::new(5, 1);
    let (mut sab, mut saa, mut sbb, mut sa, mut sb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let (x, y) = (a.standard_normal(), b.standard_normal());
        sab += x * y;
        saa += x * x;
        sbb += y * y;
        sa += x;
        sb += y;
    }
    let nf = n as f64;
    let cov = sab / nf - (sa / nf) * (sb / nf);
    let r = cov / ((saa / nf - (sa / nf).powi(2)) * (sbb / nf - (sb / nf).powi(2))).sqrt();
    assert!(r.abs() <= 5.0 / nf.sqrt(), "r = {r}");
}

#[test]
fn paper_example_recovers_its_covariance() {
    let spec = SamplerSpec::paper_example(1.0, 25.0, 11).unwrap();
    let s = draw(&spec, N, 0).unwrap();
    assert_gaussian_moments(&s, &[0.0, 0.0], &example());
}

#[test]
fn gaussian_with_example_covariance_matches_paper_example() {
    let spec = SamplerSpec::gaussian(Vector::zeros(2), example(), 12).unwrap();
    assert_gaussian_moments(&draw(&spec, N, 0).unwrap(), &[0.0, 0.0], &example());
}

#[test]
fn gaussian_with_offset_mean() {
    let cov = CovarianceMatrix::from_rows(&[
        vec![2.0, 0.3, 0.0],
        vec![0.3, 1.0, -0.4],
        vec![0.0, -0.4, 0.5],
    ])
    .unwrap();
    let mean = [1.0, -3.0, 10.0];
    let spec = SamplerSpec::gaussian(Vector::new(mean.to_vec()).unwrap(), cov.clone(), 13).unwrap();
    assert_gaussian_moments(&draw(&spec, N, 0).unwrap(), &mean, &cov);
}

#[test]
fn diagonal_gaussian_is_uncorrelated() {
    let cov = CovarianceMatrix::new(SquareMatrix::diagonal(&[4.0, 0.25])).unwrap();
    let spec = SamplerSpec::gaussian(Vector::zeros(2), cov, 14).unwrap();
    let s = draw(&spec, N, 0).unwrap();
    let c = sample_covariance(&s, Ddof::Unbiased, 0.0).unwrap();
    let r = c.get(0, 1) / (c.get(0, 0) * c.get(1, 1)).sqrt();
    assert!(r.abs() <= 5.0 / (N as f64).sqrt(), "r = {r}");
}

#[test]
fn tight_radial_has_the_prescribed_covariance() {
    // Not Gaussian, so use a loose check: the exact fourth moments would be
    // needed for a 5-SE test. 10% relative is far outside sampling noise.
    let spec = SamplerSpec::tight_radial(Vector::zeros(2), example(), 8.0, 15).unwrap();
    let fit = estimate(&draw(&spec, N, 0).unwrap(), Ddof::Unbiased, 0.0).unwrap();
    for (got, want) in fit.cov.matrix().as_slice().iter().zip(example().matrix().as_slice()) {
        assert!((got - want).abs() <= 0.1 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn tight_radial_tail_equals_bound() {
    let spec = SamplerSpec::tight_radial(Vector::zeros(2), CovarianceMatrix::identity(2), 8.0, 16).unwrap();
    let t = run_tail_curve(&spec, &[8.0], N, 1).unwrap();
    let se = (0.25f64 * 0.75 / N as f64).sqrt();
    assert!((t.empirical_tail[0] - 0.25).abs() <= 5.0 * se, "{}", t.empirical_tail[0]);
    assert_eq!(t.new_bound[0], 0.25);
}

#[test]
fn gaussian_tail_has_slack_at_twenty() {
    let spec = SamplerSpec::gaussian(Vector::zeros(2), example(), 17).unwrap();
    let t = run_tail_curve(&spec, &[20.0], N, 2).unwrap();
    // P(χ²₂ ≥ 20) = e^-10 ≈ 4.5e-5, so only a handful of hits at N = 1e5.
    let p = (-10f64).exp();
    assert!(t.empirical_tail[0] <= p + 5.0 * (p / N as f64).sqrt());
    assert!((t.new_bound[0] - 0.1).abs() < 1e-15);
    assert!(t.bounds_hold());
}

#[test]
fn coverage_of_paper_example() {
    let spec = SamplerSpec::paper_example(1.0, 25.0, 0).unwrap();
    let (m, c) = spec.true_moments();
    let r = run_coverage(&spec, 0.1, 1000, &m, &c, 1).unwrap();
    assert!(r.ellipsoid.empirical_coverage >= 0.9);
    assert!(r.sphere.empirical_coverage >= 0.9);
    assert!(r.ellipsoid.meets_guarantee() && r.sphere.meets_guarantee());
}

#[test]
fn coverage_of_tight_radial_shell() {
    let spec = SamplerSpec::tight_radial(Vector::zeros(2), example(), 20.0, 3).unwrap();
    let (m, c) = spec.true_moments();
    let r = run_coverage(&spec, 0.1, N, &m, &c, 4).unwrap();
    // A tenth of the mass sits exactly on the ellipsoid boundary: the closed
    // region holds everything, the open interior holds ~90%.
    assert_eq!(r.ellipsoid.hits, N as u64);
    let se = (0.9f64 * 0.1 / N as f64).sqrt();
    assert!((r.ellipsoid.interior_coverage - 0.9).abs() <= 5.0 * se, "{}", r.ellipsoid.interior_coverage);
    assert!(r.sphere.meets_guarantee());
}

#[test]
fn estimated_mode_is_close_to_true_mode() {
    let spec = SamplerSpec::paper_example(1.0, 25.0, 8).unwrap();
    let (fit, r) = run_coverage_estimated(&spec, 0.1, 20_000, 2).unwrap();
    assert_eq!(fit.ddof, Ddof::Unbiased);
    assert!(r.ellipsoid.empirical_coverage >= 0.99);
    assert!(r.sphere.empirical_coverage >= 0.99);
}

#[test]
fn trace_identity_cases() {
    let g2 = SamplerSpec::gaussian(Vector::zeros(2), example(), 21).unwrap();
    let r = trace_identity_check(&g2, N, 1).unwrap();
    assert!((r.tolerance - 5.0 * (4.0 / N as f64).sqrt()).abs() < 1e-15);
    assert!(r.passed, "{r:?}");

    let g1 = SamplerSpec::gaussian(Vector::new(vec![3.0]).unwrap(), CovarianceMatrix::from_rows(&[vec![9.0]]).unwrap(), 22)
        .unwrap();
    let r = trace_identity_check(&g1, N, 1).unwrap();
    assert!(r.passed, "{r:?}");
    assert!((r.mean_d2 - 1.0).abs() < 0.05);

    let t = SamplerSpec::tight_radial(Vector::zeros(2), example(), 8.0, 23).unwrap();
    let r = trace_identity_check(&t, N, 3).unwrap();
    assert!(r.passed, "{r:?}");
    // Var(d²) = n·eps − n² = 12; the sample variance should agree.
    assert!((r.sample_variance_d2 - 12.0).abs() < 0.5, "{r:?}");
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let spec = SamplerSpec::paper_example(1.0, 25.0, 99).unwrap();
    let (m, c) = spec.true_moments();
    let serial = run_coverage(&spec, 0.1, 50_000, &m, &c, 1).unwrap();
    for w in [2, 3, 8] {
        assert_eq!(run_coverage(&spec, 0.1, 50_000, &m, &c, w).unwrap(), serial);
    }
    let a = trace_identity_check(&spec, 30_000, 1).unwrap();
    let b = trace_identity_check(&spec, 30_000, 5).unwrap();
    assert_eq!(a, b);
    let grid = [2.0, 4.0, 10.0];
    assert_eq!(run_tail_curve(&spec, &grid, 30_000, 1).unwrap(), run_tail_curve(&spec, &grid, 30_000, 4).unwrap());
}

#[test]
fn figure_export_is_deterministic_and_consistent() {
    let params = FigureParams { seed: 7, ..FigureParams::default() };
    let a = export_figure(&params).unwrap();
    assert_eq!(a, export_figure(&params).unwrap());
    assert_eq!(a.samples.len(), 1000);
    assert!((a.threshold - 20.0).abs() < 1e-12);
    assert!((a.radius_sq - 270.0).abs() < 1e-12);
    assert!(a.ellipse_hits >= 900);
    let e = mvchebyshev::regions::make_ellipsoid(&Vector::zeros(2), &example(), 0.1).unwrap();
    for p in &a.ellipse_boundary {
        assert!((e.distance_sq(p).unwrap() - 20.0).abs() <= 1e-9);
    }
    for p in &a.circle_boundary {
        assert!((p[0] * p[0] + p[1] * p[1] - 270.0).abs() <= 1e-9 * 270.0);
    }
    let other = export_figure(&FigureParams { seed: 8, ..params }).unwrap();
    assert_ne!(a.samples, other.samples);
}
