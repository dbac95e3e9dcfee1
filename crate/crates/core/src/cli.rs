//! `sinkhorn` command line: `gen`, `solve`, `bounds`, `check`.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O or malformed input, 3 solver
//! diverged, infeasible or uncertified, 4 invariant violation.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{BoundReport, FamilyConstants};
use crate::error::Error;
use crate::generate::{gen_ou_grid_with, gen_quadratic, gen_random, DensitySpec, OuGridSpec};
use crate::invariants::{run_checks, CheckConfig};
use crate::oracle::{solve_certified, CertificateSummary};
use crate::problem::Problem;
use crate::solver::{solve_with_reference, Reference, SolveOptions, SolveStatus};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "sinkhorn", version, about = "Sinkhorn iteration with convergence diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a problem instance
    Gen(GenArgs),
    /// Run Sinkhorn and write a trace
    Solve(SolveArgs),
    /// Print the rate constants of an instance
    Bounds(BoundsArgs),
    /// Run the invariant suite on an instance
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Random,
    Quadratic,
    Ou,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    nx: usize,
    #[arg(long, default_value_t = 10)]
    ny: usize,
    #[arg(long, default_value_t = 0.0)]
    zero_fraction: f64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 5.0)]
    half_width: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Gaussian mean and variance of μ; the stationary law when omitted
    #[arg(long, num_args = 2, value_names = ["MEAN", "VAR"], allow_negative_numbers = true)]
    mu_gauss: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["MEAN", "VAR"], allow_negative_numbers = true)]
    nu_gauss: Option<Vec<f64>>,
    /// Variance of the stationary law [default: 1/(2 lambda)]
    #[arg(long)]
    stationary_var: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    /// Stop once H(rho_n|nu) is at most this
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    trace: PathBuf,
    /// Certify H* first and fill the bound columns; writes <trace>.cert.json
    #[arg(long)]
    certify: bool,
    #[arg(long, default_value_t = 1e-8)]
    gap_tol: f64,
    #[arg(long, default_value_t = 10_000_000)]
    certify_iters: usize,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    #[arg(long, default_value_t = 1e6)]
    guard: f64,
    /// Skip the per-step coupling entropy H(pi_n|pi_n+1)
    #[arg(long)]
    no_descent: bool,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    cert: PathBuf,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    gap_tol: f64,
    #[arg(long, default_value_t = 500)]
    horizon: usize,
    #[arg(long, default_value_t = 1_000_000)]
    certify_iters: usize,
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn classify(e: Error) -> Failure {
    let code = match e {
        Error::Io(_) | Error::Json(_) => EXIT_IO,
        Error::NoCertificate { .. }
        | Error::NonAbsolutelyContinuous { .. }
        | Error::CannotRepair { .. }
        | Error::DegenerateZ => EXIT_SOLVER,
        _ => EXIT_USAGE,
    };
    fail(code, e.to_string())
}

fn read_problem(path: &Path) -> Result<Problem, Failure> {
    Problem::read(path).map_err(|e| match e {
        Error::Io(_) | Error::Json(_) => fail(EXIT_IO, format!("{}: {e}", path.display())),
        other => fail(EXIT_IO, format!("{}: invalid problem: {other}", path.display())),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

/// `t.csv` becomes `t.cert.json`.
pub fn certificate_path(trace: &Path) -> PathBuf {
    trace.with_extension("cert.json")
}

/// Parses `argv` (including the program name) and runs one subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn density(v: &Option<Vec<f64>>) -> DensitySpec {
    match v.as_deref() {
        Some([mean, var]) => DensitySpec::Gaussian { mean: *mean, var: *var },
        _ => DensitySpec::Stationary,
    }
}

fn cmd_gen(a: GenArgs) -> Result<(), Failure> {
    let inst = match a.family {
        Family::Random => gen_random(a.seed, a.nx, a.ny, a.zero_fraction),
        Family::Quadratic => gen_quadratic(a.seed, a.nx, a.ny, a.dim, a.eps),
        Family::Ou => gen_ou_grid_with(&OuGridSpec {
            lambda: a.lambda,
            t: a.t,
            half_width: a.half_width,
            points: a.points,
            mu: density(&a.mu_gauss),
            nu: density(&a.nu_gauss),
            stationary_variance: a.stationary_var,
        }),
    }
    .map_err(classify)?;
    write_file(&a.out, &inst.to_problem().to_json_string())
}

fn cmd_solve(a: SolveArgs) -> Result<(), Failure> {
    let opts = SolveOptions {
        max_iters: a.iters,
        kl_tolerance: a.tol,
        divergence_guard: a.guard,
        record_every: a.record_every,
        descent_diagnostics: !a.no_descent,
    };
    opts.validate().map_err(classify)?;
    if a.certify && !(a.gap_tol > 0.0) {
        return Err(fail(EXIT_USAGE, "--gap-tol must be positive"));
    }
    let problem = read_problem(&a.input)?;
    let ctx = &problem.ctx;

    let cert = if a.certify { Some(solve_certified(ctx, a.gap_tol, a.certify_iters).map_err(classify)?) } else { None };
    let reference = cert.as_ref().map(|c| Reference { h_star: c.h_star, pi_star: &c.pi_star, phi_star: &c.phi_star });
    let res = solve_with_reference(ctx, None, &opts, reference).map_err(classify)?;

    write_file(&a.trace, &res.trace.to_csv_string())?;
    if let Some(c) = &cert {
        write_file(&certificate_path(&a.trace), &(c.to_json() + "\n"))?;
    }
    println!("status={:?} iterations={} kl={:.16e}", res.status, res.iterations, res.final_kl);
    match res.status {
        SolveStatus::Diverged | SolveStatus::Infeasible => Err(fail(
            EXIT_SOLVER,
            format!("solver {:?}: {}", res.status, res.failure.unwrap_or_default()),
        )),
        _ => Ok(()),
    }
}

fn cmd_bounds(a: BoundsArgs) -> Result<(), Failure> {
    let problem = read_problem(&a.input)?;
    let text = std::fs::read_to_string(&a.cert).map_err(|e| fail(EXIT_IO, format!("{}: {e}", a.cert.display())))?;
    let cert: CertificateSummary =
        serde_json::from_str(&text).map_err(|e| fail(EXIT_IO, format!("{}: {e}", a.cert.display())))?;
    let f = |k: &str| problem.meta_f64(k);
    let family = FamilyConstants {
        quadratic: match problem.family() {
            Some("quadratic") => f("m2_mu").zip(f("m2_nu")).zip(f("eps")).map(|((a, b), e)| (a, b, e)),
            _ => None,
        },
        talagrand: match problem.family() {
            Some("ou") => f("kl_mu_m")
                .zip(f("kl_nu_m"))
                .zip(f("lambda").zip(f("t")))
                .map(|((a, b), (l, t))| (a, b, l, t)),
            _ => None,
        },
    };
    let report = BoundReport::new(&problem.ctx, cert.h_star, None, family).map_err(classify)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn cmd_check(a: CheckArgs) -> Result<(), Failure> {
    if !(a.gap_tol > 0.0) {
        return Err(fail(EXIT_USAGE, "--gap-tol must be positive"));
    }
    let problem = read_problem(&a.input)?;
    let cfg = CheckConfig {
        gap_tolerance: a.gap_tol,
        rate_horizon: a.horizon,
        certify_iters: a.certify_iters,
        ..Default::default()
    };
    let results = run_checks(&problem, &cfg);
    for r in &results {
        println!("{} {} {}", if r.passed { "ok  " } else { "FAIL" }, r.name, r.detail);
    }
    match results.iter().find(|r| !r.passed) {
        Some(r) => Err(fail(EXIT_INVARIANT, format!("invariant violated: {}", r.name))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["sinkhorn"]), EXIT_USAGE);
        assert_eq!(run(["sinkhorn", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["sinkhorn", "gen", "--family", "cubic", "--out", "x"]), EXIT_USAGE);
        assert_eq!(run(["sinkhorn", "--help"]), 0);
    }

    #[test]
    fn missing_input_exits_two() {
        assert_eq!(run(["sinkhorn", "check", "--in", "/nonexistent/p.json"]), EXIT_IO);
    }

    #[test]
    fn certificate_sits_beside_trace() {
        assert_eq!(certificate_path(Path::new("out/t.csv")), PathBuf::from("out/t.cert.json"));
    }
}
