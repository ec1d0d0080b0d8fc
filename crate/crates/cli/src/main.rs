//! `sbm-spectra`: sampling, spectra, the community-count test and the
//! Monte Carlo harness from the command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical or model
//! error. Errors print the structured error name first.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use sbm_spectra::chebstats::{cheb_coeffs, clt_mean_variance, tau, DEFAULT_GRID, DEFAULT_L_MAX};
use sbm_spectra::detect::{closed_form_moments, estimate_k, run_test, run_test_cholesky};
use sbm_spectra::harness::{run, ExperimentConfig, ExperimentKind};
use sbm_spectra::io::{read_matrix, spectrum_csv, to_json_string, write_binary, write_csv};
use sbm_spectra::model::{build_spike, deform, sample_adjacency, sample_cgsbm, sample_rescaled};
use sbm_spectra::spectral::eigenvalues;
use sbm_spectra::{DeformationSpec, Error, SbmParams, SymMatrix, TestConfig, TestFunction};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "sbm-spectra", version, about = "Spectral statistics of stochastic block models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a matrix from the block model.
    Sample(SampleArgs),
    /// Eigenvalues of a symmetric matrix, largest first.
    Spectrum(SpectrumArgs),
    /// Test K = k1 against K = k2 on a rescaled matrix.
    LssTest(LssTestArgs),
    /// Estimate the number of communities from a rescaled matrix.
    EstimateK(EstimateKArgs),
    /// Chebyshev coefficient(s) of a registry test function.
    Tau(TauArgs),
    /// Limiting mean and variance of a linear spectral statistic.
    Predict(PredictArgs),
    /// BBP outlier experiment (BbpDense / BbpSparse config).
    McBbp(HarnessArgs),
    /// CLT histogram experiment (CltHistogram config).
    McClt(HarnessArgs),
    /// Detection error curve (ErrorCurve config).
    McError(HarnessArgs),
    /// Sparse-regime experiment (SparseClt / SparseMean config).
    McSparse(HarnessArgs),
    /// Resolvent local-law probe (LocalLawProbe config).
    DiagLocallaw(HarnessArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Write the main output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit JSON (schema version field "v": 1).
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MatrixFormat {
    Binary,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SampleKind {
    /// `(A - p_a) / sigma`.
    Rescaled,
    /// 0/1 adjacency matrix.
    Adjacency,
    /// Centered noise `(A - E A) / sigma`.
    Centered,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Average edge probability (with --gamma).
    #[arg(long, conflicts_with_all = ["p_s", "p_d"])]
    p_a: Option<f64>,
    /// Signal strength N (p_s - p_d) / (sigma K) (with --p-a).
    #[arg(long, requires = "p_a")]
    gamma: Option<f64>,
    /// Within-community probability (with --p-d).
    #[arg(long, requires = "p_d")]
    p_s: Option<f64>,
    #[arg(long, requires = "p_s")]
    p_d: Option<f64>,
    /// Trial seed; required, there is no default.
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SampleKind::Rescaled)]
    kind: SampleKind,
    /// Add `V diag(d) V^T` for the K-block spike basis; comma-separated.
    #[arg(long, value_delimiter = ',')]
    deform: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Binary)]
    format: MatrixFormat,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct MatrixInput {
    /// Matrix file (SBMM binary or lower-triangle CSV); `-` or absent reads stdin.
    #[arg(long)]
    matrix: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    input: MatrixInput,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LogDetMethod {
    /// Full spectrum.
    Spectrum,
    /// Cholesky factorization, falling back to the spectrum on failure.
    Cholesky,
}

#[derive(Args, Debug)]
struct LssTestArgs {
    #[command(flatten)]
    input: MatrixInput,
    #[arg(long)]
    k1: usize,
    #[arg(long)]
    k2: usize,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    p: f64,
    #[arg(long, value_enum, default_value_t = LogDetMethod::Spectrum)]
    method: LogDetMethod,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct EstimateKArgs {
    #[command(flatten)]
    input: MatrixInput,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    p: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TauArgs {
    /// Test function: x, x2, x4, logdet:<g>, phi:<g>:<p>, cheb:<l>.
    #[arg(long)]
    f: String,
    /// Single coefficient order.
    #[arg(long, conflicts_with = "order")]
    ell: Option<usize>,
    /// All coefficients 0..=order, as CSV `ell,tau`.
    #[arg(long)]
    order: Option<usize>,
    /// Quadrature intervals on [0, pi].
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Rank of the deformation.
    #[arg(long)]
    k: usize,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    p: f64,
    /// Registry test function; absent means the optimal statistic, in
    /// closed form.
    #[arg(long)]
    f: Option<String>,
    #[arg(long, default_value_t = DEFAULT_L_MAX)]
    l_max: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct HarnessArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Worker count (the SBM_SPECTRA_THREADS environment variable wins).
    #[arg(long)]
    threads: Option<usize>,
    /// Per-trial CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Histogram CSV (CLT experiments).
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Print the verdict lines to stderr.
    #[arg(long)]
    verbose: bool,
    #[command(flatten)]
    common: Common,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(String),
    Model(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Format(_) | Error::InvalidConfig(_) => Failure::Usage(format!("{}: {e}", e.name())),
            other => Failure::Model(other),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("Io: {e}"))
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Sample(a) => cmd_sample(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::LssTest(a) => cmd_lss_test(a),
        Command::EstimateK(a) => cmd_estimate_k(a),
        Command::Tau(a) => cmd_tau(a),
        Command::Predict(a) => cmd_predict(a),
        Command::McBbp(a) => cmd_harness(a, &[ExperimentKind::BbpDense, ExperimentKind::BbpSparse]),
        Command::McClt(a) => cmd_harness(a, &[ExperimentKind::CltHistogram]),
        Command::McError(a) => cmd_harness(a, &[ExperimentKind::ErrorCurve]),
        Command::McSparse(a) => cmd_harness(a, &[ExperimentKind::SparseClt, ExperimentKind::SparseMean]),
        Command::DiagLocallaw(a) => cmd_harness(a, &[ExperimentKind::LocalLawProbe]),
    }
}

/// Echoes the resolved invocation to stderr as one JSON line.
fn echo(command: &str, resolved: serde_json::Value) -> CliResult {
    let line = to_json_string(&json!({ "v": SCHEMA_VERSION, "command": command, "resolved": resolved }))?;
    eprintln!("{line}");
    Ok(())
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> CliResult {
    match out {
        Some(path) => write_file(path, bytes),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Failure::Usage(format!("Io: {}: {e}", path.display())))
}

fn emit_json(out: &Option<PathBuf>, value: serde_json::Value) -> CliResult {
    let mut text = to_json_string(&value)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn load_matrix(input: &MatrixInput) -> CliResult<SymMatrix<f64>> {
    match &input.matrix {
        Some(path) if path.as_os_str() != "-" => {
            let f = File::open(path).map_err(|e| Failure::Usage(format!("Io: {}: {e}", path.display())))?;
            Ok(read_matrix(io::BufReader::new(f))?)
        }
        _ => {
            let mut bytes = Vec::new();
            io::stdin().lock().read_to_end(&mut bytes)?;
            Ok(read_matrix(bytes.as_slice())?)
        }
    }
}

fn matrix_source(input: &MatrixInput) -> String {
    input.matrix.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string())
}

fn sample_params(a: &SampleArgs) -> CliResult<SbmParams> {
    match (a.p_a, a.p_s, a.p_d) {
        (Some(p_a), None, None) => Ok(SbmParams::from_mean_gamma(a.n, a.k, p_a, a.gamma.unwrap_or(0.0))?),
        (None, Some(p_s), Some(p_d)) => Ok(SbmParams::new(a.n, a.k, p_s, p_d)?),
        _ => Err(Failure::Usage("sample needs either --p-a [--gamma] or --p-s with --p-d".into())),
    }
}

fn cmd_sample(a: SampleArgs) -> CliResult {
    let params = sample_params(&a)?;
    echo(
        "sample",
        json!({ "params": params, "seed": a.seed, "kind": a.kind, "deform": a.deform,
                "format": if a.common.json { "json".to_string() } else { format!("{:?}", a.format).to_lowercase() },
                "out": a.common.out }),
    )?;
    let mut m = match a.kind {
        SampleKind::Rescaled => sample_rescaled::<f64>(&params, a.seed),
        SampleKind::Adjacency => sample_adjacency::<f64>(&params, a.seed),
        SampleKind::Centered => sample_cgsbm::<f64>(&params, a.seed),
    };
    if let Some(d) = &a.deform {
        let spec = DeformationSpec::new(d.clone())?;
        let spike = build_spike::<f64>(params.n, params.k)?;
        m = deform(&m, &spike, &spec)?;
    }
    if a.common.json {
        let lower: Vec<f64> = (0..m.dim()).flat_map(|i| m.row(i)[..=i].to_vec()).collect();
        return emit_json(&a.common.out, json!({ "v": SCHEMA_VERSION, "n": m.dim(), "lower": lower }));
    }
    let mut buf = Vec::new();
    match a.format {
        MatrixFormat::Binary => write_binary(&m, &mut buf)?,
        MatrixFormat::Csv => write_csv(&m, &mut buf)?,
    }
    emit(&a.common.out, &buf)
}

fn cmd_spectrum(a: SpectrumArgs) -> CliResult {
    echo("spectrum", json!({ "matrix": matrix_source(&a.input), "json": a.common.json, "out": a.common.out }))?;
    let m = load_matrix(&a.input)?;
    let spec = eigenvalues(&m)?;
    if a.common.json {
        return emit_json(&a.common.out, json!({ "v": SCHEMA_VERSION, "eigenvalues": spec.values() }));
    }
    emit(&a.common.out, spectrum_csv(&spec).as_bytes())
}

fn cmd_lss_test(a: LssTestArgs) -> CliResult {
    echo(
        "lss-test",
        json!({ "matrix": matrix_source(&a.input), "k1": a.k1, "k2": a.k2, "gamma": a.gamma,
                "p": a.p, "method": a.method, "json": a.common.json }),
    )?;
    let cfg = TestConfig::new(a.k1, a.k2, a.gamma, a.p)?;
    let m = load_matrix(&a.input)?;
    let outcome = match a.method {
        LogDetMethod::Spectrum => run_test(&m, &cfg)?,
        LogDetMethod::Cholesky => run_test_cholesky(&m, &cfg)?,
    };
    let mut value = serde_json::to_value(&outcome).map_err(Error::from)?;
    value["v"] = json!(SCHEMA_VERSION);
    if a.common.json {
        return emit_json(&a.common.out, value);
    }
    let text = format!(
        "statistic {}\nm_c {}\ndecision {:?}\nkappa_prime {}\nk_hat {}\n",
        outcome.statistic, outcome.m_c, outcome.decision, outcome.kappa_prime, outcome.k_hat
    );
    emit(&a.common.out, text.as_bytes())
}

fn cmd_estimate_k(a: EstimateKArgs) -> CliResult {
    echo(
        "estimate-k",
        json!({ "matrix": matrix_source(&a.input), "gamma": a.gamma, "p": a.p, "json": a.common.json }),
    )?;
    let m = load_matrix(&a.input)?;
    let est = estimate_k(&m, a.gamma, a.p)?;
    let mut value = serde_json::to_value(&est).map_err(Error::from)?;
    value["v"] = json!(SCHEMA_VERSION);
    if a.common.json {
        return emit_json(&a.common.out, value);
    }
    let text = format!("statistic {}\nkappa_prime {}\nk_hat {}\n", est.statistic, est.kappa_prime, est.k_hat);
    emit(&a.common.out, text.as_bytes())
}

fn parse_function(name: &str) -> CliResult<TestFunction> {
    name.parse().map_err(|e: Error| Failure::Usage(format!("{}: {e}", e.name())))
}

fn cmd_tau(a: TauArgs) -> CliResult {
    let f = parse_function(&a.f)?;
    echo("tau", json!({ "f": f.to_string(), "ell": a.ell, "order": a.order, "grid": a.grid, "json": a.common.json }))?;
    match (a.ell, a.order) {
        (Some(ell), None) => {
            let t: f64 = tau(|x: f64| f.eval(x), ell, a.grid)?;
            if a.common.json {
                return emit_json(&a.common.out, json!({ "v": SCHEMA_VERSION, "f": f.to_string(), "ell": ell, "tau": t }));
            }
            emit(&a.common.out, format!("{t:?}\n").as_bytes())
        }
        (None, Some(order)) => {
            let c = cheb_coeffs(|x: f64| f.eval(x), order, a.grid)?;
            if a.common.json {
                return emit_json(&a.common.out, json!({ "v": SCHEMA_VERSION, "f": f.to_string(), "taus": c.taus, "tail_bound": c.tail_bound }));
            }
            emit(&a.common.out, c.to_csv().as_bytes())
        }
        _ => Err(Failure::Usage("tau needs exactly one of --ell and --order".into())),
    }
}

fn cmd_predict(a: PredictArgs) -> CliResult {
    let f = a.f.as_deref().map(parse_function).transpose()?;
    echo(
        "predict",
        json!({ "k": a.k, "gamma": a.gamma, "p": a.p, "f": f.map(|f| f.to_string()),
                "l_max": a.l_max, "json": a.common.json }),
    )?;
    let pred = match f {
        None => closed_form_moments(a.k, a.gamma, a.p)?,
        Some(f) => clt_mean_variance(|x: f64| f.eval(x), a.k, a.gamma, a.p, a.l_max)?,
    };
    let mut value = serde_json::to_value(&pred).map_err(Error::from)?;
    value["v"] = json!(SCHEMA_VERSION);
    if a.common.json {
        return emit_json(&a.common.out, value);
    }
    emit(&a.common.out, format!("mean {:?}\nvariance {:?}\n", pred.mean, pred.variance).as_bytes())
}

fn cmd_harness(a: HarnessArgs, kinds: &[ExperimentKind]) -> CliResult {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| Failure::Usage(format!("Io: {}: {e}", a.config.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if !kinds.contains(&config.kind) {
        return Err(Failure::Usage(format!("config kind {:?} does not match this subcommand (expected {kinds:?})", config.kind)));
    }
    if a.threads.is_some() {
        config.threads = a.threads;
    }
    echo("harness", serde_json::to_value(&config).map_err(Error::from)?)?;
    let report = run(&config)?;
    if a.verbose {
        for c in &report.verdict {
            eprintln!("{} {} {:?} {} {:?}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.op, c.threshold);
        }
    }
    if let Some(path) = &a.csv {
        write_file(path, report.per_trial_csv().as_bytes())?;
    }
    if let Some(path) = &a.histogram {
        write_file(path, report.histogram_csv().as_bytes())?;
    }
    let mut json_text = report.to_json()?;
    json_text.push('\n');
    emit(&a.common.out, json_text.as_bytes())
}
