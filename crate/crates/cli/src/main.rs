//! `mvcheb`: command-line front end for the multivariate Chebyshev regions.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 numeric/domain error,
//! 4 I/O error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mvchebyshev::experiments::{
    default_eps_grid, export_figure, run_coverage, run_coverage_estimated, run_tail_curve, write_points_csv,
    FigureParams,
};
use mvchebyshev::moments::estimate;
use mvchebyshev::regions::{chebyshev_bound, classical_bound, make_ellipsoid, make_sphere, volume_ratio, Region};
use mvchebyshev::sampler::draw;
use mvchebyshev::{CovarianceMatrix, Ddof, SampleSet, SamplerSpec, Vector};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "mvcheb", version, about = "Multivariate Chebyshev bounds and confidence regions")]
struct Cli {
    #[command(flatten)]
    shared: Shared,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Shared {
    /// Output path (a directory for `figure`); standard output if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed; overrides the seed inside a sampler spec when given.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for Monte Carlo runs. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=256))]
    streams: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate mean and covariance from a CSV sample file.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
        ddof: u8,
        /// Ridge added to the covariance diagonal.
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
    },
    /// Volume ratio vol(sphere)/vol(ellipsoid) for a covariance matrix.
    Ratio {
        /// Inline JSON matrix such as [[1,1],[1,26]], or a path to one.
        #[arg(long)]
        cov: String,
    },
    /// Evaluate a tail bound.
    Bound {
        /// Use the classical bound var/eps² instead of dim/eps.
        #[arg(long)]
        classical: bool,
        #[arg(long, required_unless_present = "classical")]
        dim: Option<usize>,
        #[arg(long, required_if_eq("classical", "true"))]
        var: Option<f64>,
        #[arg(long)]
        eps: f64,
    },
    /// Build a sphere or ellipsoid region, optionally testing a point.
    Region {
        #[arg(long, value_parser = ["ellipsoid", "sphere"])]
        kind: String,
        #[arg(long)]
        cov: String,
        /// Inline JSON vector; the origin if omitted.
        #[arg(long)]
        mean: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Inline JSON vector to test for membership.
        #[arg(long)]
        point: Option<String>,
    },
    /// Monte Carlo coverage of both regions.
    Coverage {
        /// Sampler spec JSON, inline or a path.
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Also score regions built from re-estimated moments.
        #[arg(long)]
        estimated: bool,
    },
    /// Empirical tail curve against both bounds.
    Tail {
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        /// Comma-separated ascending levels; defaults to n,2n,5n,10n,20n.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Export samples and region outlines for the 2-D example.
    Figure {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 25.0)]
        k: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 256)]
        points: usize,
    },
    /// Draw samples from a spec and write them as CSV.
    Sample {
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Io(m) => m,
        }
    }
}

impl From<mvchebyshev::Error> for CliError {
    fn from(e: mvchebyshev::Error) -> Self {
        if e.is_input_error() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Domain(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Inline JSON if the argument looks like JSON, otherwise the file it names.
fn json_arg(arg: &str) -> CliResult<String> {
    let t = arg.trim_start();
    if t.starts_with('[') || t.starts_with('{') {
        Ok(arg.to_string())
    } else {
        let p = Path::new(arg);
        fs::read_to_string(p).map_err(|e| io_err(p, e))
    }
}

fn parse_cov(arg: &str) -> CliResult<CovarianceMatrix> {
    let m: mvchebyshev::SquareMatrix =
        serde_json::from_str(&json_arg(arg)?).map_err(|e| CliError::Usage(format!("covariance: {e}")))?;
    Ok(CovarianceMatrix::new(m)?)
}

fn parse_vector(arg: &str, what: &str) -> CliResult<Vector> {
    serde_json::from_str(&json_arg(arg)?).map_err(|e| CliError::Usage(format!("{what}: {e}")))
}

fn parse_spec(arg: &str, seed: Option<u64>) -> CliResult<SamplerSpec> {
    let spec = SamplerSpec::from_json(&json_arg(arg)?)?;
    Ok(match seed {
        Some(s) => spec.with_seed(s),
        None => spec,
    })
}

/// Writes to a temporary file next to `path` and renames it into place, so
/// failures never leave partial output.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => io::stdout().write_all(bytes).map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn emit_json(out: Option<&Path>, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    emit(out, text.as_bytes())
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types always serialize")
}

fn cmd_estimate(input: &Path, ddof: u8, ridge: f64) -> CliResult<Value> {
    let file = fs::File::open(input).map_err(|e| io_err(input, e))?;
    let samples = SampleSet::read_csv(io::BufReader::new(file))
        .map_err(|e| CliError::Usage(format!("{}: {e}", input.display())))?;
    let ddof = Ddof::try_from(ddof)?;
    let fit = estimate(&samples, ddof, ridge)?;
    Ok(json!({
        "n_samples": samples.len(),
        "ddof": ddof.as_u8(),
        "mean": fit.mean,
        "covariance": fit.cov,
        "trace": fit.cov.trace(),
        "det": fit.cov.det(),
    }))
}

fn cmd_ratio(cov: &str) -> CliResult<Value> {
    let c = parse_cov(cov)?;
    Ok(json!({
        "dim": c.dim(),
        "trace": c.trace(),
        "det": c.det(),
        "ratio": volume_ratio(&c),
    }))
}

fn cmd_bound(classical: bool, dim: Option<usize>, var: Option<f64>, eps: f64) -> CliResult<Value> {
    let usage = |e: mvchebyshev::Error| CliError::Usage(e.to_string());
    let (kind, b) = if classical {
        let var = var.ok_or_else(|| CliError::Usage("--classical needs --var".into()))?;
        ("classical", classical_bound(var, eps).map_err(usage)?)
    } else {
        let dim = dim.ok_or_else(|| CliError::Usage("--dim is required".into()))?;
        ("mahalanobis", chebyshev_bound(dim, eps).map_err(usage)?)
    };
    Ok(json!({ "bound": kind, "raw": b.raw, "clamped": b.clamped }))
}

fn cmd_region(kind: &str, cov: &str, mean: Option<&str>, delta: f64, point: Option<&str>) -> CliResult<Value> {
    let cov = parse_cov(cov)?;
    let mean = match mean {
        Some(m) => parse_vector(m, "mean")?,
        None => Vector::zeros(cov.dim()),
    };
    let region = match kind {
        "ellipsoid" => Region::Ellipsoid(make_ellipsoid(&mean, &cov, delta)?),
        _ => Region::Sphere(make_sphere(&mean, &cov, delta)?),
    };
    let Some(point) = point else {
        return Ok(to_value(&region));
    };
    let x = parse_vector(point, "point")?;
    Ok(json!({
        "region": region,
        "point": x,
        "distance_sq": region.distance_sq(&x)?,
        "contains": region.contains(&x)?,
        "volume": region.volume(),
    }))
}

fn cmd_coverage(spec: &SamplerSpec, delta: f64, n: usize, streams: usize, estimated: bool) -> CliResult<Value> {
    let (mean, cov) = spec.true_moments();
    let pair = run_coverage(spec, delta, n, &mean, &cov, streams)?;
    let mut out = json!({
        "spec": spec,
        "delta": delta,
        "n_samples": n,
        "ellipsoid": pair.ellipsoid,
        "sphere": pair.sphere,
    });
    if estimated {
        let (fit, est) = run_coverage_estimated(spec, delta, n, streams)?;
        out["estimated"] = json!({
            "mean": fit.mean,
            "covariance": fit.cov,
            "ellipsoid": est.ellipsoid,
            "sphere": est.sphere,
        });
    }
    Ok(out)
}

fn cmd_tail(spec: &SamplerSpec, n: usize, eps: Option<Vec<f64>>, streams: usize) -> CliResult<Value> {
    let grid = eps.unwrap_or_else(|| default_eps_grid(spec.dim()));
    let curve = run_tail_curve(spec, &grid, n, streams)?;
    let mut v = to_value(&curve);
    v["spec"] = to_value(spec);
    Ok(v)
}

fn cmd_figure(params: &FigureParams, dir: &Path) -> CliResult<Value> {
    let fig = export_figure(params)?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let mut files = Vec::new();
    for (name, pts) in [
        ("samples.csv", &fig.samples),
        ("ellipse.csv", &fig.ellipse_boundary),
        ("circle.csv", &fig.circle_boundary),
    ] {
        let mut buf = Vec::new();
        write_points_csv(pts, &mut buf)?;
        files.push((dir.join(name), buf));
    }
    let n = fig.params.n_samples as f64;
    let manifest = json!({
        "params": fig.params,
        "threshold": fig.threshold,
        "radius_sq": fig.radius_sq,
        "volume_ratio": fig.volume_ratio,
        "ellipse_hits": fig.ellipse_hits,
        "circle_hits": fig.circle_hits,
        "ellipse_coverage": fig.ellipse_hits as f64 / n,
        "circle_coverage": fig.circle_hits as f64 / n,
        "files": {
            "samples": "samples.csv",
            "ellipse": "ellipse.csv",
            "circle": "circle.csv",
        },
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("JSON values always serialize");
    text.push('\n');
    files.push((dir.join("manifest.json"), text.into_bytes()));

    // Stage everything before renaming so a failure leaves no partial set.
    let mut staged = Vec::new();
    for (path, bytes) in &files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
        tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    }
    Ok(manifest)
}

fn cmd_sample(spec: &SamplerSpec, n: usize) -> CliResult<Vec<u8>> {
    let samples = draw(spec, n, 0)?;
    let mut buf = Vec::new();
    samples.write_csv(&mut buf)?;
    Ok(buf)
}

fn run(cli: Cli) -> CliResult<()> {
    let Shared { out, seed, streams } = cli.shared;
    let out = out.as_deref();
    let streams = streams as usize;
    let value = match cli.command {
        Command::Estimate { input, ddof, ridge } => cmd_estimate(&input, ddof, ridge)?,
        Command::Ratio { cov } => cmd_ratio(&cov)?,
        Command::Bound { classical, dim, var, eps } => cmd_bound(classical, dim, var, eps)?,
        Command::Region { kind, cov, mean, delta, point } => {
            cmd_region(&kind, &cov, mean.as_deref(), delta, point.as_deref())?
        }
        Command::Coverage { spec, delta, n, estimated } => {
            cmd_coverage(&parse_spec(&spec, seed)?, delta, n, streams, estimated)?
        }
        Command::Tail { spec, n, eps } => cmd_tail(&parse_spec(&spec, seed)?, n, eps, streams)?,
        Command::Figure { sigma, k, delta, n, points } => {
            let params = FigureParams {
                sigma,
                k,
                delta,
                seed: seed.unwrap_or(0),
                n_samples: n,
                boundary_points: points,
            };
            let dir = out.unwrap_or(Path::new("figure"));
            let manifest = cmd_figure(&params, dir)?;
            return emit_json(None, &manifest);
        }
        Command::Sample { spec, n } => {
            let csv = cmd_sample(&parse_spec(&spec, seed)?, n)?;
            return emit(out, &csv);
        }
    };
    emit_json(out, &value)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

