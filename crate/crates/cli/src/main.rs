//! `lma`: logmodularity analysis of unital subalgebras of M_n(C).
//!
//! Exit codes across subcommands: 0 success (for `check`: logmodular),
//! 1 negative verdict / refutation, 2 invalid input, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lma_cli::instance::{instance_json, InstanceSpec, TamperKind};
use lma_core::{
    cholesky_upper, factor_positive, factorization_search, is_logmodular, reverse_cholesky_upper,
    triangularize, Certificate, ComplexMatrix, CoreError, Partition, SearchOptions, Subalgebra,
    ToleranceConfig, TriangularizeOutcome,
};

#[derive(Parser)]
#[command(
    name = "lma",
    version,
    about = "Decide whether a unital subalgebra of M_n(C) is unitarily equivalent to a block upper triangular algebra, with certificates and refutations"
)]
struct Cli {
    /// Master tolerance; scales the whole threshold bundle. Falls back to
    /// the LMA_TOL environment variable when absent.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report dimensions, the support relation, and row/column witness
    /// dimensions of an algebra file.
    Analyze { file: PathBuf },
    /// Build a conjugation certificate or a stage-tagged failure report.
    Triangularize {
        file: PathBuf,
        /// Write the certificate JSON here as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full verdict with factorization witnesses or refutation evidence.
    /// Several files are checked in parallel; output keeps input order.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Positive-definite witnesses per positive verdict.
        #[arg(long, default_value_t = 8)]
        witnesses: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Factor a Hermitian positive-definite target inside the algebra,
    /// either exactly through a certificate or by least-squares search.
    Factor {
        algebra: PathBuf,
        target: PathBuf,
        /// Use this certificate instead of triangularizing afresh.
        #[arg(long, conflicts_with = "search")]
        cert: Option<PathBuf>,
        /// Least-squares search instead of the exact certificate route.
        #[arg(long)]
        search: bool,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cholesky factor of a Hermitian positive-definite matrix file.
    Chol {
        file: PathBuf,
        /// Factor as R·R* instead of R*·R.
        #[arg(long)]
        reverse: bool,
    },
    /// Generate a test instance file.
    Gen {
        /// Ordered block sizes, e.g. `1,2`.
        #[arg(long, value_delimiter = ',', required = true)]
        partition: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = TamperArg::None)]
        tamper: TamperArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TamperArg {
    None,
    ReplaceWithDiagonal,
    DropBasisElement,
}

impl From<TamperArg> for TamperKind {
    fn from(arg: TamperArg) -> Self {
        match arg {
            TamperArg::None => TamperKind::None,
            TamperArg::ReplaceWithDiagonal => TamperKind::ReplaceWithDiagonal,
            TamperArg::DropBasisElement => TamperKind::DropBasisElement,
        }
    }
}

const EXIT_OK: u8 = 0;
const EXIT_NEGATIVE: u8 = 1;
const EXIT_INVALID_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

struct CliFailure {
    code: u8,
    message: String,
}

type CliResult<T> = Result<T, CliFailure>;

/// Writes a line to stdout, tolerating closed pipes (`lma ... | head`).
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn input_error(message: impl Into<String>) -> CliFailure {
    CliFailure {
        code: EXIT_INVALID_INPUT,
        message: message.into(),
    }
}

/// Errors raised after inputs validated cleanly are numerical breakdowns.
fn compute_error(e: CoreError) -> CliFailure {
    CliFailure {
        code: EXIT_NUMERICAL,
        message: e.to_string(),
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))
}

fn load_algebra(path: &Path, tol: &ToleranceConfig) -> CliResult<Subalgebra> {
    let text = read_file(path)?;
    Subalgebra::from_json(&text, tol).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn load_matrix(path: &Path) -> CliResult<ComplexMatrix> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn tolerances(master: Option<f64>) -> CliResult<ToleranceConfig> {
    // explicit flag wins over the environment
    let master = match master {
        Some(t) => Some(t),
        None => match std::env::var("LMA_TOL") {
            Ok(text) => Some(
                text.parse::<f64>()
                    .map_err(|e| input_error(format!("LMA_TOL: {e}")))?,
            ),
            Err(_) => None,
        },
    };
    match master {
        None => Ok(ToleranceConfig::default()),
        Some(t) => ToleranceConfig::from_master(t)
            .map_err(|e| input_error(format!("invalid tolerance: {e}"))),
    }
}

fn cmd_analyze(file: &Path, tol: &ToleranceConfig) -> CliResult<u8> {
    let algebra = load_algebra(file, tol)?;
    let n = algebra.n();
    let support = algebra.support_relation(tol);
    let adjoint = algebra.adjoint_algebra();
    let row_dims: Vec<usize> = (0..n)
        .map(|i| algebra.row_witness_basis(i, tol).dim())
        .collect();
    let col_dims: Vec<usize> = (0..n)
        .map(|i| adjoint.row_witness_basis(i, tol).dim())
        .collect();
    let edges: Vec<[usize; 2]> = support
        .edges()
        .into_iter()
        .map(|(i, j)| [i + 1, j + 1])
        .collect();
    let report = serde_json::json!({
        "n": n,
        "dim": algebra.dim(),
        "unital": algebra.is_unital(),
        "support_edges": edges,
        "row_witness_dims": row_dims,
        "column_witness_dims": col_dims,
    });
    emit(&serde_json::to_string_pretty(&report).unwrap());
    Ok(EXIT_OK)
}

fn cmd_triangularize(file: &Path, out: Option<&Path>, tol: &ToleranceConfig) -> CliResult<u8> {
    let algebra = load_algebra(file, tol)?;
    match triangularize(&algebra, tol).map_err(compute_error)? {
        TriangularizeOutcome::Certified(cert) => {
            let text = cert.to_json();
            if let Some(path) = out {
                std::fs::write(path, &text)
                    .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
            }
            emit(&text);
            Ok(EXIT_OK)
        }
        TriangularizeOutcome::Refuted(failure) => {
            emit(&serde_json::to_string_pretty(&failure).unwrap());
            Ok(EXIT_NEGATIVE)
        }
    }
}

fn check_one(file: &Path, witnesses: usize, seed: u64, tol: &ToleranceConfig) -> (String, u8) {
    let algebra = match load_algebra(file, tol) {
        Ok(a) => a,
        Err(e) => {
            return (
                serde_json::json!({ "error": e.message }).to_string(),
                e.code,
            );
        }
    };
    if !algebra.is_unital() {
        return (
            serde_json::json!({ "error": "verdicts need a unital algebra" }).to_string(),
            EXIT_INVALID_INPUT,
        );
    }
    match is_logmodular(&algebra, tol, witnesses, seed) {
        Ok(verdict) => {
            let code = match verdict.decision {
                lma_core::Decision::Logmodular => EXIT_OK,
                lma_core::Decision::NotLogmodular => EXIT_NEGATIVE,
            };
            (verdict.to_json(), code)
        }
        Err(e) => (
            serde_json::json!({ "error": e.to_string() }).to_string(),
            EXIT_NUMERICAL,
        ),
    }
}

fn cmd_check(files: &[PathBuf], witnesses: usize, seed: u64, tol: &ToleranceConfig) -> u8 {
    let results: Vec<(String, u8)> = std::thread::scope(|scope| {
        let handles: Vec<_> = files
            .iter()
            .map(|file| scope.spawn(move || check_one(file, witnesses, seed, tol)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|_| {
                    (
                        serde_json::json!({ "error": "worker panicked" }).to_string(),
                        EXIT_NUMERICAL,
                    )
                })
            })
            .collect()
    });
    let mut worst = EXIT_OK;
    for (text, code) in results {
        emit(&text);
        worst = worst.max(code);
    }
    worst
}

#[allow(clippy::too_many_arguments)]
fn cmd_factor(
    algebra_path: &Path,
    target_path: &Path,
    cert_path: Option<&Path>,
    search: bool,
    restarts: usize,
    seed: u64,
    tol: &ToleranceConfig,
) -> CliResult<u8> {
    let algebra = load_algebra(algebra_path, tol)?;
    let target = load_matrix(target_path)?;

    if search {
        let options = SearchOptions {
            restarts,
            seed,
            ..SearchOptions::default()
        };
        let result =
            factorization_search(&algebra, &target, &options, tol).map_err(|e| match e {
                CoreError::DimensionMismatch(_) | CoreError::InvalidArgument(_) => {
                    input_error(e.to_string())
                }
                other => compute_error(other),
            })?;
        let report = serde_json::json!({
            "residual": result.residual,
            "minimizer": result.minimizer,
        });
        emit(&serde_json::to_string_pretty(&report).unwrap());
        return Ok(EXIT_OK);
    }

    let certificate: Certificate = match cert_path {
        Some(path) => {
            let text = read_file(path)?;
            Certificate::from_json(&text)
                .map_err(|e| input_error(format!("{}: {e}", path.display())))?
        }
        None => match triangularize(&algebra, tol).map_err(compute_error)? {
            TriangularizeOutcome::Certified(cert) => cert,
            TriangularizeOutcome::Refuted(failure) => {
                emit(&serde_json::to_string_pretty(&failure).unwrap());
                return Ok(EXIT_NEGATIVE);
            }
        },
    };
    let witness = factor_positive(&algebra, &certificate, &target, tol).map_err(|e| match e {
        CoreError::PreconditionViolation(_) | CoreError::DimensionMismatch(_) => {
            input_error(e.to_string())
        }
        other => compute_error(other),
    })?;
    emit(&serde_json::to_string_pretty(&witness).unwrap());
    Ok(EXIT_OK)
}

fn cmd_chol(file: &Path, reverse: bool, tol: &ToleranceConfig) -> CliResult<u8> {
    let matrix = load_matrix(file)?;
    let factor = if reverse {
        reverse_cholesky_upper(&matrix, tol)
    } else {
        cholesky_upper(&matrix, tol)
    }
    .map_err(|e| match e {
        CoreError::InvalidArgument(_) | CoreError::DimensionMismatch(_) => {
            input_error(e.to_string())
        }
        other => compute_error(other),
    })?;
    emit(&serde_json::to_string_pretty(&factor).unwrap());
    Ok(EXIT_OK)
}

fn cmd_gen(
    partition: &[usize],
    seed: u64,
    tamper: TamperArg,
    out: &Path,
    tol: &ToleranceConfig,
) -> CliResult<u8> {
    let partition = Partition::new(partition.to_vec())
        .map_err(|e| input_error(format!("invalid partition: {e}")))?;
    let spec = InstanceSpec {
        partition,
        seed,
        tamper: tamper.into(),
    };
    let text = instance_json(&spec, tol).map_err(|e| input_error(e.to_string()))?;
    std::fs::write(out, text)
        .map_err(|e| input_error(format!("cannot write {}: {e}", out.display())))?;
    Ok(EXIT_OK)
}

fn run(cli: Cli) -> CliResult<u8> {
    let tol = tolerances(cli.tol)?;
    match &cli.command {
        Command::Analyze { file } => cmd_analyze(file, &tol),
        Command::Triangularize { file, out } => cmd_triangularize(file, out.as_deref(), &tol),
        Command::Check {
            files,
            witnesses,
            seed,
        } => Ok(cmd_check(files, *witnesses, *seed, &tol)),
        Command::Factor {
            algebra,
            target,
            cert,
            search,
            restarts,
            seed,
        } => cmd_factor(
            algebra,
            target,
            cert.as_deref(),
            *search,
            *restarts,
            *seed,
            &tol,
        ),
        Command::Chol { file, reverse } => cmd_chol(file, *reverse, &tol),
        Command::Gen {
            partition,
            seed,
            tamper,
            out,
        } => cmd_gen(partition, *seed, *tamper, out, &tol),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
