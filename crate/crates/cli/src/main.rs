//! `rforest`: batch front end. Every command prints one JSON run report on
//! stdout; diagnostics go to stderr. Exit codes: 0 pass, 1 violation,
//! 2 malformed input or unmet precondition, 3 resource limit.

mod commands;

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rforest::Rat;
use serde::Serialize;
use serde_json::Value;

#[derive(Parser)]
#[command(name = "rforest", version, about = "R-forests with 1-1-Lipschitz predicates")]
struct Cli {
    #[command(flatten)]
    params: Params,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Params {
    /// Truncation bound K; defaults to one that is large for the inputs.
    #[arg(long = "K", alias = "k", global = true)]
    pub k: Option<Rat>,
    /// Tolerance ε.
    #[arg(long, global = true)]
    pub eps: Option<Rat>,
    /// Sample mesh ε_mesh.
    #[arg(long, global = true)]
    pub mesh: Option<Rat>,
    /// Heart density mesh δ, overriding the file's.
    #[arg(long, global = true)]
    pub delta: Option<Rat>,
    /// Largest |A|·|B| the distortion search may face.
    #[arg(long, global = true, default_value_t = 4096)]
    pub max_sample: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    /// Random tree metric.
    Tree,
    /// Metric failing the 4-point condition on a planted quadruple.
    Violation,
    /// Random structure with its generators as tuple.
    Structure,
    /// Heart instance.
    Heart,
    /// Structure with tuple `ā b c` for `unzip`.
    Unzip,
    /// `source` and `target` for `extend`.
    Extension,
    /// `q0` and `q1` for `interp`.
    Interp,
    /// `m`, `b0`, `b1`, `c0`, `c1` for `indep`.
    Amalgam,
}

#[derive(Subcommand)]
enum Command {
    /// Metric axioms, the 4-point condition, and 1-1-Lipschitzness or the heart axioms.
    Check { file: PathBuf },
    /// Truncated distortion ρ_K between the samples of two structures.
    Distortion { a: PathBuf, b: PathBuf },
    /// Extends `source` to match the trailing entries of `target`.
    Extend { source: PathBuf, target: PathBuf },
    /// Type path from an independent pair to the pair `b c` of the file.
    Unzip {
        file: PathBuf,
        #[arg(long)]
        a_len: usize,
        #[arg(long, default_value_t = 8)]
        steps: usize,
    },
    /// Linear path between two structures with independent pairs.
    Interp {
        q0: PathBuf,
        q1: PathBuf,
        #[arg(long)]
        a_len: usize,
        #[arg(long, default_value_t = 8)]
        steps: usize,
    },
    /// Distance between the types of `b0` and `b1` over `ā`; tuple `ā b0 b1`.
    Typedist {
        file: PathBuf,
        #[arg(long)]
        a_len: usize,
    },
    /// Order-property witness with tuples of length `n`.
    Witness {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heart validation, orbits and scaling.
    Heart {
        file: PathBuf,
        /// Scale factor in (0, 1].
        #[arg(long)]
        scale: Option<Rat>,
        /// Parameter elements, by index.
        #[arg(long, value_delimiter = ',')]
        params: Vec<usize>,
    },
    /// Seeded instance generator; the only source of randomness.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(long)]
        seed: u64,
        /// Number of points or generators.
        #[arg(long, default_value_t = 6)]
        n: usize,
        /// Output file; kinds with several instances write `<out>.<role>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pointed isometry of the fingerprints of two structures.
    Iso { a: PathBuf, b: PathBuf },
    /// Independence amalgam of M, B0, B1, C0, C1.
    Indep {
        m: PathBuf,
        b0: PathBuf,
        b1: PathBuf,
        c0: PathBuf,
        c1: PathBuf,
    },
}

/// Ends a command: pass, or a violation with its report.
pub enum Outcome {
    Pass(Value),
    Violation(Value),
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
    pub detail: Value,
}

impl Failure {
    pub fn malformed(message: impl ToString) -> Self {
        Failure {
            code: 2,
            kind: "malformed_input",
            message: message.to_string(),
            detail: Value::Null,
        }
    }

    pub fn precondition(message: impl ToString) -> Self {
        Failure {
            code: 2,
            kind: "precondition",
            message: message.to_string(),
            detail: Value::Null,
        }
    }

    pub fn limit(message: impl ToString, detail: Value) -> Self {
        Failure {
            code: 3,
            kind: "resource_limit",
            message: message.to_string(),
            detail,
        }
    }
}

#[derive(Serialize)]
struct ParamsEcho {
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    k: Option<Rat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<Rat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mesh: Option<Rat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<Rat>,
}

#[derive(Serialize)]
struct RunReport {
    command: &'static str,
    seed: Option<u64>,
    params: ParamsEcho,
    status: &'static str,
    result: Value,
    wall_time_ms: u128,
}

/// Reads a path, or stdin for `-`.
pub fn read_input(path: &PathBuf) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| Failure::malformed(format!("stdin: {e}")))?;
        return Ok(text);
    }
    std::fs::read_to_string(path).map_err(|e| Failure::malformed(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let mut params = cli.params;
    let seed = match &cli.command {
        Command::Gen { seed, .. } => Some(*seed),
        _ => None,
    };
    let (name, outcome) = commands::run(cli.command, &mut params);
    let (status, code, result) = match outcome {
        Ok(Outcome::Pass(v)) => ("pass", 0, v),
        Ok(Outcome::Violation(v)) => ("violation", 1, v),
        Err(f) => {
            eprintln!("rforest {name}: {}", f.message);
            let error = serde_json::json!({"kind": f.kind, "message": f.message, "detail": f.detail});
            ("error", f.code, serde_json::json!({ "error": error }))
        }
    };
    let report = RunReport {
        command: name,
        seed,
        params: ParamsEcho {
            k: params.k,
            eps: params.eps,
            mesh: params.mesh,
            delta: params.delta,
        },
        status,
        result,
        wall_time_ms: start.elapsed().as_millis(),
    };
    // A closed stdout (e.g. `| head`) is not an error worth a panic.
    let _ = writeln!(
        std::io::stdout().lock(),
        "{}",
        serde_json::to_string_pretty(&report).expect("reports serialize")
    );
    ExitCode::from(code)
}
