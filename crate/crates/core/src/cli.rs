//! The `ctls` command line.
//!
//! Exit codes: 0 success, 1 I/O, flag or configuration error, 2 estimator
//! error, 3 sweep failure rate above 5% in some cell.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::estimators::{estimate, EstimateResult, EstimatorOptions, Method, MuChoice, Warning};
use crate::harness::{run_sweep, write_trace_csv, write_trace_json, SweepConfig};
use crate::io::{format_matrix, read_matrix, write_matrix, MatrixFormat};
use crate::linalg::{numerical_rank, singular_values, sym_eigen, DEFAULT_RANK_TOL};
use crate::model::{
    generate_model, observe, unwhiten_solution, whiten, DesignKind, NoiseKind, ObservedData, PartitionSpec,
};
use crate::rng::derive_seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ESTIMATOR: i32 = 2;
pub const EXIT_FAILURE_RATE: i32 = 3;

/// Stream of the observation noise relative to the `simulate` seed.
pub const SIMULATE_NOISE_STREAM: u64 = 3;

#[derive(Parser, Debug)]
#[command(name = "ctls", version, about = "Constrained total least squares estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate X from matrix files A and B.
    Estimate(EstimateArgs),
    /// Generate a synthetic instance.
    Simulate(SimulateArgs),
    /// Run a Monte-Carlo consistency sweep.
    Sweep(SweepArgs),
    /// Report the rank and conditioning assumptions of a data set.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Tls,
    CtlsCols,
    CtlsRows,
    CtlsRowcol,
    Projection,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Tls => Method::Tls,
            MethodArg::CtlsCols => Method::CtlsColumns,
            MethodArg::CtlsRows => Method::CtlsRows,
            MethodArg::CtlsRowcol => Method::CtlsRowcol,
            MethodArg::Projection => Method::Projection,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MuArg {
    Min,
    Mean,
    Max,
}

impl From<MuArg> for MuChoice {
    fn from(m: MuArg) -> Self {
        match m {
            MuArg::Min => MuChoice::Min,
            MuArg::Mean => MuChoice::Mean,
            MuArg::Max => MuChoice::Max,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Mtxjson,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => MatrixFormat::Csv,
            FormatArg::Mtxjson => MatrixFormat::MtxJson,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DesignArg {
    Iid,
    Grid,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NoiseArg {
    Gauss,
    Uniform,
    Rademacher,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long = "a", value_name = "FILE")]
    a: PathBuf,
    #[arg(long = "b", value_name = "FILE")]
    b: PathBuf,
    /// Number of exact leading rows of [A B].
    #[arg(long, default_value_t = 0)]
    j: usize,
    /// Number of exact leading columns of A.
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "mean")]
    mu: MuArg,
    /// Noise covariance of the noisy columns; the data are whitened first.
    #[arg(long = "sigma-cov", value_name = "FILE")]
    sigma_cov: Option<PathBuf>,
    /// Write X̂ here; diagnostics then go to stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Output format of X̂ (default: from the --out extension, else csv).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    ell: usize,
    #[arg(long, default_value_t = 0)]
    j: usize,
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "iid")]
    design: DesignArg,
    #[arg(long, value_enum, default_value = "gauss")]
    noise: NoiseArg,
    #[arg(long = "out-dir", value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// JSON sweep configuration.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Full JSON trace.
    #[arg(long = "out-trace", value_name = "FILE")]
    out_trace: PathBuf,
    /// Flat per-trial CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long = "a", value_name = "FILE")]
    a: PathBuf,
    #[arg(long = "b", value_name = "FILE")]
    b: PathBuf,
    #[arg(long, default_value_t = 0)]
    j: usize,
    #[arg(long, default_value_t = 0)]
    k: usize,
}

/// Metadata written by `simulate` next to the matrices.
#[derive(Debug, Serialize, Deserialize)]
pub struct SimulationMeta {
    pub format_version: u32,
    pub n: usize,
    pub ell: usize,
    pub j: usize,
    pub k: usize,
    pub m: usize,
    pub sigma: f64,
    pub seed: u64,
    pub noise_seed: u64,
    pub design: String,
    pub noise: String,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn estimator(e: &Error) -> Self {
        Self {
            code: EXIT_ESTIMATOR,
            message: format!("{}: {e}", e.tag()),
        }
    }
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Validate(a) => cmd_validate(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load_data(a: &Path, b: &Path, j: usize, k: usize) -> Result<ObservedData, Failure> {
    let a = read_matrix(a).map_err(|e| Failure::usage(e.to_string()))?;
    let b = read_matrix(b).map_err(|e| Failure::usage(e.to_string()))?;
    ObservedData::new(a, b, j, k).map_err(|e| Failure::usage(e.to_string()))
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::usage(format!("{}: {e}", path.display()))
}

fn cmd_estimate(args: &EstimateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let data = load_data(&args.a, &args.b, args.j, args.k)?;
    let method = Method::from(args.method);
    let p = data.partition;
    if !method.supports(p.j, p.k, p.n) {
        return Err(Failure::usage(format!(
            "--method {method} does not apply to j={}, k={}, n={}",
            p.j, p.k, p.n
        )));
    }
    let opts = EstimatorOptions {
        mu: args.mu.into(),
        ..Default::default()
    };
    let result = match &args.sigma_cov {
        None => estimate(&data, method, &opts).map_err(|e| Failure::estimator(&e))?,
        Some(path) => {
            let cov = read_matrix(path).map_err(|e| Failure::usage(e.to_string()))?;
            let white = whiten(&data, &cov).map_err(|e| Failure::usage(e.to_string()))?;
            let mut r = estimate(&white.data, method, &opts).map_err(|e| Failure::estimator(&e))?;
            r.x_hat = unwhiten_solution(&r.x_hat, &white.transform).map_err(|e| Failure::estimator(&e))?;
            r
        }
    };

    let format = args
        .format
        .map(MatrixFormat::from)
        .or_else(|| args.out.as_deref().map(MatrixFormat::from_path))
        .unwrap_or(MatrixFormat::Csv);
    let w = |out: &mut dyn Write, s: &str| {
        out.write_all(s.as_bytes())
            .map_err(|e| io_failure(Path::new("<stdout>"), e))
    };
    match &args.out {
        Some(path) => {
            write_matrix(path, &result.x_hat, format).map_err(|e| Failure::usage(e.to_string()))?;
            w(out, &diagnostics_block(method, &result, ""))?;
        }
        None => {
            w(out, &format_matrix(&result.x_hat, format))?;
            w(out, &diagnostics_block(method, &result, "# "))?;
        }
    }
    Ok(EXIT_OK)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.16e}"))
}

/// `key: value` lines describing an estimate, each prefixed by `prefix`.
fn diagnostics_block(method: Method, r: &EstimateResult, prefix: &str) -> String {
    let d = &r.diagnostics;
    let mut lines = vec![
        format!("method: {method}"),
        format!("sigma2_hat: {:.16e}", r.sigma2_hat),
        format!("mu: {}", fmt_opt(r.mu)),
        format!("smallest_eigs: {}", fmt_list(&r.smallest_eigs)),
        format!("z_lower_min_sv: {:.16e}", d.z_lower_min_sv),
        format!("gram_condition: {}", fmt_opt(d.gram_condition)),
        format!("eig_gap: {}", fmt_opt(d.eig_gap)),
        format!("constraint_residual: {}", fmt_opt(d.constraint_residual)),
    ];
    for rd in &d.rank_decisions {
        lines.push(format!("rank[{}]: {}", rd.what, rd.rank));
    }
    for wn in &d.warnings {
        match wn {
            Warning::EigGapDegenerate { gap, threshold } => lines.push(format!(
                "warning: EigGapDegenerate gap={gap:.3e} threshold={threshold:.3e}"
            )),
        }
    }
    lines.iter().map(|l| format!("{prefix}{l}\n")).collect()
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    if !(args.sigma.is_finite() && args.sigma >= 0.0) {
        return Err(Failure::usage(format!(
            "--sigma must be finite and nonnegative, got {}",
            args.sigma
        )));
    }
    let partition =
        PartitionSpec::new(args.j, args.k, args.n, args.ell, args.m).map_err(|e| Failure::usage(e.to_string()))?;
    let design = match args.design {
        DesignArg::Iid => DesignKind::IidRows,
        DesignArg::Grid => DesignKind::FixedGrid,
    };
    let noise = match args.noise {
        NoiseArg::Gauss => NoiseKind::Gaussian,
        NoiseArg::Uniform => NoiseKind::Uniform,
        NoiseArg::Rademacher => NoiseKind::Rademacher,
    };
    let model = generate_model(partition, args.seed, design)
        .map_err(|e| Failure::usage(e.to_string()))?
        .with_noise(args.sigma, noise);
    let noise_seed = derive_seed(args.seed, SIMULATE_NOISE_STREAM);
    let data = observe(&model, noise_seed);

    fs::create_dir_all(&args.out_dir).map_err(|e| io_failure(&args.out_dir, e))?;
    let dir = &args.out_dir;
    for (name, m) in [("A.csv", &data.a), ("B.csv", &data.b), ("X_true.csv", &model.x_true)] {
        write_matrix(&dir.join(name), m, MatrixFormat::Csv).map_err(|e| Failure::usage(e.to_string()))?;
    }
    let meta = SimulationMeta {
        format_version: 1,
        n: args.n,
        ell: args.ell,
        j: args.j,
        k: args.k,
        m: args.m,
        sigma: args.sigma,
        seed: args.seed,
        noise_seed,
        design: enum_name(&args.design),
        noise: enum_name(&args.noise),
    };
    let meta_path = dir.join("model.json");
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&meta_path, text + "\n").map_err(|e| io_failure(&meta_path, e))?;
    writeln!(out, "wrote A.csv, B.csv, X_true.csv, model.json to {}", dir.display())
        .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    Ok(EXIT_OK)
}

fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_failure(&args.config, e))?;
    let config: SweepConfig = serde_json::from_str(&text).map_err(|e| io_failure(&args.config, e))?;
    let trace = run_sweep(&config).map_err(|e| Failure::usage(e.to_string()))?;
    write_trace_json(&trace, &args.out_trace).map_err(|e| io_failure(&args.out_trace, e))?;
    if let Some(path) = &args.csv {
        write_trace_csv(&trace, path).map_err(|e| io_failure(path, e))?;
    }
    out.write_all(trace.aggregate_table().as_bytes())
        .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    if trace.exceeds_failure_budget() {
        return Err(Failure {
            code: EXIT_FAILURE_RATE,
            message: format!(
                "failure rate {:.1}% exceeds the 5% budget in at least one cell",
                100.0 * trace.max_failure_rate()
            ),
        });
    }
    Ok(EXIT_OK)
}

fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let data = load_data(&args.a, &args.b, args.j, args.k)?;
    let p = data.partition;
    let mut lines = vec![format!("m={} n={} ell={} j={} k={}", p.m, p.n, p.ell, p.j, p.k)];
    let mut ok = true;
    let rank_of = |m: &crate::linalg::Matrix| -> Result<usize, Failure> {
        Ok(numerical_rank(
            &singular_values(m).map_err(|e| Failure::usage(e.to_string()))?,
            DEFAULT_RANK_TOL,
        ))
    };
    if p.j > 0 {
        let r = rank_of(&data.a.submatrix(0..p.j, 0..p.n))?;
        ok &= r == p.j;
        lines.push(format!("fixed rows rank: {r} (need {})", p.j));
    }
    if p.k > 0 {
        let c21 = data.a.submatrix(p.j..p.m, 0..p.k);
        let r = rank_of(&c21)?;
        ok &= r == p.k;
        lines.push(format!("fixed columns rank: {r} (need {})", p.k));
        let eig = sym_eigen(&c21.gram().scale(1.0 / p.m as f64)).map_err(|e| Failure::usage(e.to_string()))?;
        lines.push(format!("min eigenvalue of C21'C21/m: {:.6e}", eig.values[0]));
    }
    let structural = p.k < p.n && p.j < p.n && p.m > p.n + p.ell;
    ok &= structural;
    lines.push(format!("k < n, j < n, m > n + ell: {structural}"));
    lines.push(format!("status: {}", if ok { "ok" } else { "violated" }));
    for l in lines {
        writeln!(out, "{l}").map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    }
    Ok(if ok { EXIT_OK } else { EXIT_USAGE })
}
