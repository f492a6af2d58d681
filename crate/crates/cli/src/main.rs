mod run;
mod theory_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Block eigensolvers with adaptive shrink-and-expand block sizing.
#[derive(Debug, Parser)]
#[command(name = "blockeig", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one solve and export its convergence history.
    Solve(RunArgs),
    /// Run strategies none, fix, slope and slopek on the same problem.
    Compare(RunArgs),
    /// Run the numerical checks of the convergence theory.
    Theory(TheoryArgs),
    /// Write a generated matrix in Matrix Market format.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Args)]
#[group(id = "source", required = true, multiple = false)]
struct Source {
    /// Matrix Market file (real or integer, symmetric or general).
    #[arg(long, group = "source")]
    matrix: Option<PathBuf>,
    /// Generator: laplacian1d:N, diag:v1,v2,... or diag-geom:n,ratio.
    #[arg(long = "gen", group = "source")]
    generator: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// si, sd, lobpcg or tracemin.
    #[arg(long, default_value = "lobpcg")]
    solver: String,
    #[arg(long)]
    nev: usize,
    /// Expanded block size [default: 1.5·nev for lobpcg, 2·nev otherwise].
    #[arg(long)]
    nex: Option<usize>,
    /// Shrunken block size [default: nev+5 if below nex, else the midpoint].
    #[arg(long)]
    nes: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// none, fix, slope or slopek (ignored by compare).
    #[arg(long, default_value = "none")]
    strategy: String,
    #[arg(long, default_value_t = 12)]
    je: usize,
    #[arg(long, default_value_t = 2)]
    js: usize,
    #[arg(long, default_value_t = 1.1)]
    mu: f64,
    #[arg(long, default_value_t = 10)]
    jp: usize,
    #[arg(long, default_value_t = 5)]
    jwarm: usize,
    #[arg(long, default_value_t = 1e-4)]
    rwarm: f64,
    /// xdrop, powered (si only) or random.
    #[arg(long, default_value = "xdrop")]
    expand_mode: String,
    /// identity or diagonal.
    #[arg(long, default_value = "identity")]
    precond: String,
    /// Shift of the si solves.
    #[arg(long, default_value_t = 0.0)]
    zeta: f64,
    /// Inner CG steps of tracemin.
    #[arg(long, default_value_t = 5)]
    cg_iters: usize,
    /// Smallest eigenvalue of the input; when it is not positive the matrix
    /// is shifted to `A − 1.05·λ1·I` before solving.
    #[arg(long, value_name = "LAMBDA1", allow_negative_numbers = true)]
    shift_spd: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Example3x3,
    Rate,
    Decomp,
    Main,
    Perturb,
    All,
}

#[derive(Debug, Clone, Args)]
struct TheoryArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args)]
struct GenArgs {
    /// Generator: laplacian1d:N, diag:v1,v2,... or diag-geom:n,ratio.
    #[arg(long = "gen")]
    generator: String,
    /// Output path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status: 0 success, 1 input error, 2 not converged, 3 theory violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Ok,
    NotConverged,
    Violation,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve(args) => run::solve(&args),
        Command::Compare(args) => run::compare(&args),
        Command::Theory(args) => theory_cmd::run(&args),
        Command::Gen(args) => run::generate(&args),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(2),
        Ok(Outcome::Violation) => ExitCode::from(3),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
