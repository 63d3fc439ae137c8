//! `betaflow`: run the processes of the catalog and the verification suites.

// `!(x > 0.0)` is how NaN gets rejected along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use betaflow::identities::{a1doubleprime_case, a1prime_case, build_identity, check_identity, run_suite};
use betaflow::ifs::{left_product_run_capped, DEFAULT_MAX_STEPS};
use betaflow::models::{build_case, default_params, CATALOG};
use betaflow::rngdist::try_replicate;
use betaflow::stats::{ks_one_sample, sorted_copy, KsReport};
use betaflow::verify::{run_acceptance, VerifyConfig};
use betaflow::{DistSpec, Error, ModelCase, Params, StreamKey};

#[derive(Parser)]
#[command(
    name = "betaflow",
    version,
    about = "Iterated random linear maps on [0,1] and their beta/gamma limits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the model catalog.
    ListModels,
    /// Sample the forward chain X_n.
    RunForward(RunArgs),
    /// Sample backward (nested interval) limits.
    RunBackward(RunArgs),
    /// Sample the gamma-side chain X'_n.
    RunGammaChain(RunArgs),
    /// Sample the first column of rank-one left matrix products.
    RunMatrix(RunArgs),
    /// Check a distributional identity (a `*`/`?` pattern runs the default grid).
    CheckIdentity(IdentityArgs),
    /// Run the acceptance suite and write verify.json.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    #[arg(long, env = "BETAFLOW_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    model: String,
    /// Comma-separated `key=value` list; catalog defaults when omitted.
    #[arg(long)]
    params: Option<String>,
    #[arg(long, default_value_t = 200)]
    n_steps: u64,
    #[arg(long, default_value_t = 10_000)]
    n_samples: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Starting point (default 0.5, or 1 for the gamma chain).
    #[arg(long)]
    x0: Option<f64>,
    /// Gamma innovation shape (default: the model's b).
    #[arg(long)]
    innovation_shape: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct IdentityArgs {
    #[arg(long)]
    identity: String,
    /// Catalog model, for id_a1prime and id_a1doubleprime.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    params: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    n_samples: usize,
    /// Write the reports as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    /// Directory for verify.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

/// Failure classes and their exit codes.
enum Failure {
    Config(String),
    Tests,
    Numeric(String),
}

impl Failure {
    fn field(field: &str, err: impl std::fmt::Display) -> Self {
        Failure::Config(format!("{field}: {err}"))
    }

    fn from_error(field: &str, err: Error) -> Self {
        match err {
            Error::NoConvergence { .. } | Error::Excursion { .. } => Failure::Numeric(err.to_string()),
            Error::UnknownModel(_) => Failure::field("--model", err),
            Error::UnknownIdentity(_) => Failure::field("--identity", err),
            Error::Parameter { .. } | Error::InvalidSpec(_) => Failure::field("--params", err),
            _ => Failure::field(field, err),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::ListModels => {
            list_models();
            Ok(())
        }
        Command::RunForward(a) => run_process(Process::Forward, a),
        Command::RunBackward(a) => run_process(Process::Backward, a),
        Command::RunGammaChain(a) => run_process(Process::Gamma, a),
        Command::RunMatrix(a) => run_process(Process::Matrix, a),
        Command::CheckIdentity(a) => check(a),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Tests) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn setup(common: &Common) -> CliResult {
    if !(common.alpha > 0.0 && common.alpha < 1.0) {
        return Err(Failure::field("--alpha", format!("{} must lie in (0,1)", common.alpha)));
    }
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(Failure::field("--workers", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::field("--workers", e))?;
    }
    Ok(())
}

fn list_models() {
    println!(
        "{:<12} {:<10} {:<40} {:<48} description",
        "name", "params", "limit", "scheme"
    );
    for e in CATALOG {
        println!(
            "{:<12} {:<10} {:<40} {:<48} {}",
            e.name,
            e.keys.join(","),
            e.limit,
            e.classification,
            e.anchor
        );
    }
}

#[derive(Clone, Copy)]
enum Process {
    Forward,
    Backward,
    Gamma,
    Matrix,
}

impl Process {
    fn tag(self) -> &'static str {
        match self {
            Process::Forward => "forward",
            Process::Backward => "backward",
            Process::Gamma => "gamma",
            Process::Matrix => "matrix",
        }
    }
}

fn load_model(model: &str, params: Option<&str>) -> Result<ModelCase, Failure> {
    let params = match params {
        Some(s) => Params::parse(s).map_err(|e| Failure::field("--params", e))?,
        None => {
            default_params(model).ok_or_else(|| Failure::from_error("--model", Error::UnknownModel(model.into())))?
        }
    };
    build_case(model, &params).map_err(|e| Failure::from_error("--params", e))
}

fn run_process(process: Process, args: RunArgs) -> CliResult {
    setup(&args.common)?;
    if args.n_samples == 0 {
        return Err(Failure::field("--n-samples", "must be at least 1"));
    }
    if !(args.tol > 0.0) {
        return Err(Failure::field("--tol", format!("{} must be > 0", args.tol)));
    }
    let case = load_model(&args.model, args.params.as_deref())?;
    let label = format!("{}({})", case.name, case.params);
    let key = StreamKey::experiment(args.common.seed, &format!("{}/{label}", process.tag()));
    let n = args.n_samples;
    let numeric = |e| Failure::from_error("--model", e);

    let (values, target): (Vec<f64>, Option<DistSpec>) = match process {
        Process::Forward => {
            let x0 = args.x0.unwrap_or(0.5);
            if !(0.0..=1.0).contains(&x0) {
                return Err(Failure::field("--x0", format!("{x0} must lie in [0,1]")));
            }
            let xs = try_replicate(&key, n, |mut k| {
                betaflow::ifs::forward_run(&case.mu, x0, args.n_steps, &mut k)
            })
            .map_err(numeric)?;
            (xs, case.predicted_limit)
        }
        Process::Backward => {
            let xs = try_replicate(&key, n, |mut k| {
                betaflow::ifs::backward_nest(&case.mu, &mut k, args.tol, DEFAULT_MAX_STEPS).map(|r| r.0)
            })
            .map_err(numeric)?;
            (xs, case.predicted_limit)
        }
        Process::Gamma => {
            let x0 = args.x0.unwrap_or(1.0);
            if !(x0 > 0.0) {
                return Err(Failure::field("--x0", format!("{x0} must be > 0")));
            }
            let b_model = case.innovation_shape();
            let b = match (args.innovation_shape, b_model) {
                (Some(b), _) => b,
                (None, Some(b)) => b,
                (None, None) => {
                    return Err(Failure::field(
                        "--innovation-shape",
                        "required for models without a predicted limit",
                    ))
                }
            };
            if !(b > 0.0) {
                return Err(Failure::field("--innovation-shape", format!("{b} must be > 0")));
            }
            let xs = try_replicate(&key, n, |mut k| {
                betaflow::ifs::gamma_forward_run(&case.mu, b, x0, args.n_steps, &mut k)
            })
            .map_err(numeric)?;
            let target = if Some(b) == b_model { case.gamma_limit } else { None };
            (xs, target)
        }
        Process::Matrix => {
            let xs = try_replicate(&key, n, |mut k| {
                left_product_run_capped(&case.mu, &mut k, args.tol, DEFAULT_MAX_STEPS).map(|p| p.m[0][0])
            })
            .map_err(numeric)?;
            (xs, case.predicted_limit)
        }
    };

    if let Some(path) = &args.out {
        write_samples(path, args.format, &case, args.common.seed, &values)?;
    }

    let summary = format!("{} {label}: n={n}", process.tag());
    match target {
        Some(spec) => {
            let sorted = sorted_copy(&values).map_err(numeric)?;
            let r = ks_one_sample(&sorted, |x| spec.cdf(x), args.common.alpha).map_err(numeric)?;
            println!(
                "{summary} KS vs {spec}: D={:.6} critical={:.6} {}",
                r.statistic,
                r.critical,
                verdict(r.pass)
            );
            if !r.pass {
                return Err(Failure::Tests);
            }
        }
        None => println!("{summary} (no closed-form limit to test against)"),
    }
    Ok(())
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    model: &'a str,
    params: &'a Params,
    seed: u64,
    n: usize,
}

#[derive(Serialize)]
struct SampleFile<'a> {
    metadata: Metadata<'a>,
    values: &'a [f64],
}

fn write_samples(path: &Path, format: Format, case: &ModelCase, seed: u64, values: &[f64]) -> CliResult {
    let body = match format {
        Format::Csv => {
            let mut s = String::from("index,value\n");
            for (i, v) in values.iter().enumerate() {
                s.push_str(&format!("{i},{v}\n"));
            }
            s
        }
        Format::Json => {
            let file = SampleFile {
                metadata: Metadata {
                    model: &case.name,
                    params: &case.params,
                    seed,
                    n: values.len(),
                },
                values,
            };
            serde_json::to_string(&file).map_err(|e| Failure::field("--out", e))? + "\n"
        }
    };
    fs::write(path, body).map_err(|e| Failure::field("--out", format!("{}: {e}", path.display())))
}

fn check(args: IdentityArgs) -> CliResult {
    setup(&args.common)?;
    let alpha = args.common.alpha;
    let seed = args.common.seed;
    let map = |e| Failure::from_error("--identity", e);
    let reports: Vec<KsReport> = if args.identity.contains(['*', '?']) {
        run_suite(&args.identity, args.n_samples, alpha, seed).map_err(map)?
    } else {
        let case = match args.identity.as_str() {
            "id_a1prime" | "id_a1doubleprime" => {
                let model = args
                    .model
                    .as_deref()
                    .ok_or_else(|| Failure::field("--model", format!("{} needs a catalog model", args.identity)))?;
                let m = load_model(model, args.params.as_deref())?;
                if args.identity == "id_a1prime" {
                    a1prime_case(&m)
                } else {
                    a1doubleprime_case(&m)
                }
            }
            name => {
                let params =
                    Params::parse(args.params.as_deref().unwrap_or("")).map_err(|e| Failure::field("--params", e))?;
                build_identity(name, &params)
            }
        }
        .map_err(map)?;
        let key = StreamKey::experiment(seed, &case.label());
        vec![check_identity(&case, args.n_samples, alpha, &key).map_err(|e| Failure::from_error("--n-samples", e))?]
    };
    for r in &reports {
        println!(
            "{} D={:.6} critical={:.6} {}",
            r.test,
            r.statistic,
            r.critical,
            verdict(r.pass)
        );
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("{} identities checked, {failed} failed", reports.len());
    if let Some(path) = &args.out {
        let body = serde_json::to_string_pretty(&reports).map_err(|e| Failure::field("--out", e))? + "\n";
        fs::write(path, body).map_err(|e| Failure::field("--out", format!("{}: {e}", path.display())))?;
    }
    if failed > 0 {
        return Err(Failure::Tests);
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> CliResult {
    setup(&args.common)?;
    let cfg = VerifyConfig::new(args.common.seed, args.common.alpha);
    let report = run_acceptance(&cfg).map_err(|e| Failure::from_error("--seed", e))?;
    for c in &report.criteria {
        let detail = if c.numeric.is_empty() {
            format!("{} tests, {} failed", c.ks.len(), c.failures)
        } else {
            let worst = c.numeric.iter().map(|n| n.max_abs_error).fold(0.0, f64::max);
            format!("max error {worst:.3e}")
        };
        println!("criterion {}: {} ({detail}) {}", c.id, c.name, verdict(c.pass));
    }
    fs::create_dir_all(&args.out).map_err(|e| Failure::field("--out", e))?;
    let path = args.out.join("verify.json");
    let body = serde_json::to_string_pretty(&report).map_err(|e| Failure::field("--out", e))? + "\n";
    fs::write(&path, body).map_err(|e| Failure::field("--out", format!("{}: {e}", path.display())))?;
    println!(
        "verify seed={}: {} of {} KS tests failed (allowed {}), {} -> {}",
        report.seed,
        report.ks_failures,
        report.ks_tests,
        report.max_ks_failures,
        verdict(report.pass),
        path.display()
    );
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Tests)
    }
}
