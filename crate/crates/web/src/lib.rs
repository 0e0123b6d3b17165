//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function returns a JSON string; the page parses it and
//! draws on a canvas. The `*_json` functions hold the logic and are plain
//! Rust so they can be tested natively.

use mvchebyshev::experiments::{export_figure, run_tail_curve, FigureParams};
use mvchebyshev::moments::example_covariance;
use mvchebyshev::regions::{example_ratio, volume_ratio};
use mvchebyshev::{CovarianceMatrix, Error, SamplerSpec, Vector};
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_SAMPLES: usize = 200_000;

fn cap_samples(n: usize) -> Result<usize, Error> {
    if n == 0 || n > MAX_SAMPLES {
        return Err(Error::InvalidArgument(format!("sample count must be in 1..={MAX_SAMPLES}, got {n}")));
    }
    Ok(n)
}

/// Samples of the `(y, y + z)` example plus the ellipse and circle outlines.
pub fn figure_json(sigma: f64, k: f64, delta: f64, n: usize, seed: u64, points: usize) -> Result<String, Error> {
    let params = FigureParams { sigma, k, delta, seed, n_samples: cap_samples(n)?, boundary_points: points };
    let fig = export_figure(&params)?;
    Ok(serde_json::to_string(&fig).expect("figure data serializes"))
}

/// `example_ratio(k)` on a log grid, and the general formula at the
/// highlighted `k` for comparison.
pub fn ratio_curve_json(k_min: f64, k_max: f64, points: usize, highlight_k: f64) -> Result<String, Error> {
    if !(k_min > 0.0 && k_max > k_min) || points < 2 {
        return Err(Error::InvalidArgument("need 0 < k_min < k_max and at least 2 points".into()));
    }
    let (a, b) = (k_min.ln(), k_max.ln());
    let k: Vec<f64> = (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect();
    let ratio = k.iter().map(|k| example_ratio(*k)).collect::<Result<Vec<_>, _>>()?;
    let general = volume_ratio(&example_covariance(1.0, highlight_k)?);
    Ok(json!({
        "k": k,
        "ratio": ratio,
        "highlight": { "k": highlight_k, "ratio": example_ratio(highlight_k)?, "general_formula": general },
    })
    .to_string())
}

/// Volume ratio of an arbitrary covariance given as a JSON matrix.
pub fn matrix_ratio_json(cov: &str) -> Result<String, Error> {
    let m: mvchebyshev::SquareMatrix =
        serde_json::from_str(cov).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let c = CovarianceMatrix::new(m)?;
    Ok(json!({ "trace": c.trace(), "det": c.det(), "ratio": volume_ratio(&c) }).to_string())
}

/// Empirical Mahalanobis and Euclidean tails against `n/ε` for either the
/// Gaussian example (`kind = "gaussian"`) or the two-point radial law that
/// meets the bound at `ε = radial_eps`.
pub fn tail_curve_json(kind: &str, k: f64, radial_eps: f64, n: usize, seed: u64) -> Result<String, Error> {
    let cov = example_covariance(1.0, k)?;
    let spec = match kind {
        "gaussian" => SamplerSpec::gaussian(Vector::zeros(2), cov, seed)?,
        "tight_radial" => SamplerSpec::tight_radial(Vector::zeros(2), cov, radial_eps, seed)?,
        other => return Err(Error::InvalidSpec(format!("unknown kind `{other}`"))),
    };
    let grid: Vec<f64> = (0..40).map(|i| 10f64.powf(i as f64 / 39.0 * 2.0)).collect();
    let curve = run_tail_curve(&spec, &grid, cap_samples(n)?, 1)?;
    Ok(serde_json::to_string(&curve).expect("tail curve serializes"))
}

fn js_err(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub fn figure(sigma: f64, k: f64, delta: f64, n: usize, seed: u32, points: usize) -> Result<String, JsValue> {
    figure_json(sigma, k, delta, n, u64::from(seed), points).map_err(js_err)
}

#[wasm_bindgen]
pub fn ratio_curve(k_min: f64, k_max: f64, points: usize, highlight_k: f64) -> Result<String, JsValue> {
    ratio_curve_json(k_min, k_max, points, highlight_k).map_err(js_err)
}

#[wasm_bindgen]
pub fn matrix_ratio(cov: &str) -> Result<String, JsValue> {
    matrix_ratio_json(cov).map_err(js_err)
}

#[wasm_bindgen]
pub fn tail_curve(kind: &str, k: f64, radial_eps: f64, n: usize, seed: u32) -> Result<String, JsValue> {
    tail_curve_json(kind, k, radial_eps, n, u64::from(seed)).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn figure_matches_example_parameters() {
        let v = parse(&figure_json(1.0, 25.0, 0.1, 1000, 0, 128).unwrap());
        assert!((v["threshold"].as_f64().unwrap() - 20.0).abs() < 1e-12);
        assert!((v["radius_sq"].as_f64().unwrap() - 270.0).abs() < 1e-12);
        assert_eq!(v["samples"].as_array().unwrap().len(), 1000);
        assert_eq!(v["ellipse_boundary"].as_array().unwrap().len(), 128);
        assert!(figure_json(1.0, 25.0, 0.1, 0, 0, 128).is_err());
        assert!(figure_json(1.0, 25.0, 1.1, 10, 0, 128).is_err());
    }

    #[test]
    fn ratio_curve_has_minimum_near_two() {
        let v = parse(&ratio_curve_json(0.01, 100.0, 401, 25.0).unwrap());
        let ratio: Vec<f64> = serde_json::from_value(v["ratio"].clone()).unwrap();
        let k: Vec<f64> = serde_json::from_value(v["k"].clone()).unwrap();
        let (i, _) = ratio.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((k[i] - 2.0).abs() < 0.05, "{}", k[i]);
        let h = &v["highlight"];
        assert!((h["ratio"].as_f64().unwrap() - 2.7).abs() < 1e-12);
        assert!((h["general_formula"].as_f64().unwrap() - 2.7).abs() < 1e-12);
        assert!(ratio_curve_json(1.0, 0.5, 10, 2.0).is_err());
    }

    #[test]
    fn matrix_ratio_parses_json() {
        let v = parse(&matrix_ratio_json("[[1,0],[0,4]]").unwrap());
        assert!((v["ratio"].as_f64().unwrap() - 1.25).abs() < 1e-12);
        assert!(matrix_ratio_json("[[1,2],[2,1]]").is_err());
        assert!(matrix_ratio_json("nonsense").is_err());
    }

    #[test]
    fn tail_curve_respects_bound() {
        let v = parse(&tail_curve_json("tight_radial", 25.0, 8.0, 20_000, 1).unwrap());
        let tail: Vec<f64> = serde_json::from_value(v["empirical_tail"].clone()).unwrap();
        let bound: Vec<f64> = serde_json::from_value(v["new_bound"].clone()).unwrap();
        let se: Vec<f64> = serde_json::from_value(v["standard_error"].clone()).unwrap();
        for i in 0..tail.len() {
            assert!(tail[i] <= bound[i] + 5.0 * se[i]);
        }
        assert!(tail_curve_json("cauchy", 25.0, 8.0, 100, 1).is_err());
        assert!(tail_curve_json("tight_radial", 25.0, 1.0, 100, 1).is_err());
    }
}
