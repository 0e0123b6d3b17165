use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const PAPER_SPEC: &str = r#"{"kind":"paper_example","sigma":1.0,"k":25.0,"seed":42}"#;

fn mvcheb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvcheb")).args(args).output().expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = mvcheb(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(args: &[&str]) -> i32 {
    mvcheb(args).status.code().expect("exit code")
}

fn close(v: &Value, want: f64, rtol: f64) -> bool {
    (v.as_f64().unwrap() - want).abs() <= rtol * want.abs()
}

#[test]
fn ratio_examples() {
    let v = json_ok(&["ratio", "--cov", "[[1,1],[1,26]]"]);
    assert!(close(&v["ratio"], 2.7, 1e-12), "{v}");
    assert!(close(&v["trace"], 27.0, 1e-15));
    assert!(close(&v["det"], 25.0, 1e-12));
    assert!(close(&json_ok(&["ratio", "--cov", "[[1,0],[0,1]]"])["ratio"], 1.0, 1e-15));
    assert!(close(&json_ok(&["ratio", "--cov", "[[1,0],[0,4]]"])["ratio"], 1.25, 1e-12));
    assert_eq!(code(&["ratio", "--cov", "[[1,2],[2,1]]"]), 3);
    assert_eq!(code(&["ratio", "--cov", "[[1,2],[2"]), 2);
}

#[test]
fn bound_examples() {
    let v = json_ok(&["bound", "--dim", "2", "--eps", "20"]);
    assert!(close(&v["raw"], 0.1, 1e-15) && close(&v["clamped"], 0.1, 1e-15));
    let v = json_ok(&["bound", "--classical", "--var", "27", "--eps", "16.43168"]);
    assert!(close(&v["raw"], 0.1, 1e-6), "{v}");
    assert_eq!(code(&["bound", "--dim", "2", "--eps", "0"]), 2);
    assert_eq!(code(&["bound", "--classical", "--eps", "1"]), 2);
    assert_eq!(code(&["bound", "--dim", "2", "--eps", "nope"]), 2);
}

#[test]
fn region_json_and_membership() {
    let v = json_ok(&["region", "--kind", "ellipsoid", "--cov", "[[1,1],[1,26]]", "--delta", "0.1"]);
    assert_eq!(v["kind"], "ellipsoid");
    assert!(close(&v["threshold"], 20.0, 1e-15));
    let v = json_ok(&["region", "--kind", "sphere", "--cov", "[[1,1],[1,26]]", "--delta", "0.1"]);
    assert!(close(&v["radius_sq"], 270.0, 1e-15));

    let v = json_ok(&["region", "--kind", "ellipsoid", "--cov", "[[1,1],[1,26]]", "--point", "[1,1]"]);
    assert_eq!(v["contains"], true);
    assert!(close(&v["distance_sq"], 1.0, 1e-12));
    let v = json_ok(&["region", "--kind", "ellipsoid", "--cov", "[[1,1],[1,26]]", "--point", "[5,5]"]);
    assert_eq!(v["contains"], false);

    assert_eq!(code(&["region", "--kind", "ellipsoid", "--cov", "[[1,1],[1,26]]", "--delta", "1.5"]), 3);
    assert_eq!(code(&["region", "--kind", "cube", "--cov", "[[1]]"]), 2);
}

#[test]
fn coverage_is_deterministic_and_meets_guarantee() {
    let args = ["coverage", "--spec", PAPER_SPEC, "--delta", "0.1", "--n", "1000"];
    let a = mvcheb(&args);
    let b = mvcheb(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(v["ellipsoid"]["empirical_coverage"].as_f64().unwrap() >= 0.9);
    assert_eq!(v["ellipsoid"]["n_samples"], 1000);
}

#[test]
fn coverage_streams_do_not_change_results() {
    let base = ["coverage", "--spec", PAPER_SPEC, "--n", "10000", "--delta", "0.5"];
    let one = json_ok(&[&base[..], &["--streams", "1"]].concat());
    let four = json_ok(&[&base[..], &["--streams", "4"]].concat());
    assert_eq!(one, four);
    assert_eq!(code(&[&base[..], &["--streams", "0"]].concat()), 2);
}

#[test]
fn coverage_of_tight_radial() {
    let spec = r#"{"kind":"tight_radial","dim":2,"eps":20,"seed":1}"#;
    let v = json_ok(&["coverage", "--spec", spec, "--n", "100000", "--delta", "0.1", "--streams", "4"]);
    let e = &v["ellipsoid"];
    let se = (0.09f64 / 1e5).sqrt();
    assert!((e["interior_coverage"].as_f64().unwrap() - 0.9).abs() <= 5.0 * se, "{e}");
    assert_eq!(e["empirical_coverage"], 1.0);
}

#[test]
fn coverage_error_paths() {
    assert_eq!(code(&["coverage", "--spec", r#"{"kind":"cauchy"}"#]), 2);
    assert_eq!(code(&["coverage", "--spec", PAPER_SPEC, "--delta", "0"]), 3);
    assert_eq!(code(&["coverage", "--spec", "/definitely/not/here.json"]), 4);
}

#[test]
fn tail_defaults_and_bound() {
    let spec = r#"{"kind":"tight_radial","dim":2,"eps":8,"seed":3}"#;
    let v = json_ok(&["tail", "--spec", spec, "--n", "20000"]);
    let grid: Vec<f64> = serde_json::from_value(v["eps_grid"].clone()).unwrap();
    assert_eq!(grid, vec![2.0, 4.0, 10.0, 20.0, 40.0]);
    let v = json_ok(&["tail", "--spec", spec, "--n", "20000", "--eps", "1,8"]);
    assert_eq!(v["new_bound"][0], 1.0);
    assert!(close(&v["new_bound"][1], 0.25, 1e-15));
    assert_eq!(code(&["tail", "--spec", spec, "--eps", "8,1"]), 2);
}

#[test]
fn sample_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let csv = csv.to_str().unwrap();

    let out = mvcheb(&["sample", "--spec", PAPER_SPEC, "--n", "5", "--out", csv]);
    assert!(out.status.success());
    let text = fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert_eq!(text.lines().next(), Some("x1,x2"));

    assert!(mvcheb(&["sample", "--spec", PAPER_SPEC, "--n", "100000", "--out", csv]).status.success());
    let v = json_ok(&["estimate", "--input", csv]);
    let cov: Vec<Vec<f64>> = serde_json::from_value(v["covariance"].clone()).unwrap();
    let n = 1e5f64;
    // Gaussian asymptotic SE of each covariance entry.
    let want = [[1.0, 1.0], [1.0, 26.0]];
    for i in 0..2 {
        for j in 0..2 {
            let se = ((want[i][i] * want[j][j] + want[i][j] * want[i][j]) / n).sqrt();
            assert!((cov[i][j] - want[i][j]).abs() <= 5.0 * se, "{cov:?}");
        }
    }
    assert_eq!(code(&["sample", "--spec", r#"{"kind":"uniform"}"#, "--n", "5"]), 2);
}

#[test]
fn estimate_examples_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p.to_str().unwrap().to_string()
    };
    let two = write("two.csv", "x1\n-1\n1\n");
    let v = json_ok(&["estimate", "--input", &two]);
    assert_eq!(v["covariance"], serde_json::json!([[2.0]]));
    let v = json_ok(&["estimate", "--input", &two, "--ddof", "0"]);
    assert_eq!(v["covariance"], serde_json::json!([[1.0]]));

    assert_eq!(code(&["estimate", "--input", &write("empty.csv", "")]), 2);
    assert_eq!(code(&["estimate", "--input", &write("ragged.csv", "x1,x2\n1,2\n3\n")]), 2);
    let line = write("line.csv", "x1,x2\n0,0\n1,1\n2,2\n");
    assert_eq!(code(&["estimate", "--input", &line]), 3);
    assert_eq!(code(&["estimate", "--input", &line, "--ridge", "0.01"]), 0);
    assert_eq!(code(&["estimate", "--input", "/no/such/file.csv"]), 4);
}

fn read_dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn figure_defaults_reproduce_the_example() {
    let root = tempfile::tempdir().unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    for d in [&a, &b] {
        assert!(mvcheb(&["figure", "--seed", "7", "--out", d.to_str().unwrap()]).status.success());
    }
    let fa = read_dir_files(&a);
    assert_eq!(fa, read_dir_files(&b));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["circle.csv", "ellipse.csv", "manifest.json", "samples.csv"]);

    let manifest: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert!(close(&manifest["threshold"], 20.0, 1e-15));
    assert!(close(&manifest["radius_sq"], 270.0, 1e-15));
    assert_eq!(manifest["params"]["n_samples"], 1000);
    assert!(manifest["ellipse_coverage"].as_f64().unwrap() >= 0.9);
    let samples = fs::read_to_string(a.join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1001);
    let ellipse = fs::read_to_string(a.join("ellipse.csv")).unwrap();
    assert_eq!(ellipse.lines().count(), 257);
}

#[test]
fn figure_identity_circle_quartet() {
    // k = 1, sigma = 1 is not isotropic, but the circle only depends on the
    // trace: radius² = 3/0.25 = 12, so the four points sit on the axes.
    let dir = tempfile::tempdir().unwrap();
    let out = mvcheb(&["figure", "--k", "1", "--delta", "0.25", "--points", "4", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let circle = fs::read_to_string(dir.path().join("circle.csv")).unwrap();
    let pts: Vec<(f64, f64)> = circle
        .lines()
        .skip(1)
        .map(|l| {
            let (x, y) = l.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    let r = 12f64.sqrt();
    let want = [(r, 0.0), (0.0, r), (-r, 0.0), (0.0, -r)];
    for (p, q) in pts.iter().zip(want) {
        assert!((p.0 - q.0).abs() < 1e-12 && (p.1 - q.1).abs() < 1e-12, "{p:?}");
    }
}

#[test]
fn figure_unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let target = blocker.join("sub");
    assert_eq!(code(&["figure", "--out", target.to_str().unwrap()]), 4);
}
