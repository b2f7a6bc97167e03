//! `s2wb`: batch driver for the σ₂ verification kit.
//!
//! Exit codes: 0 when every hard check holds, 2 when a check is violated,
//! 3 when the run itself failed (bad flags, solver breakdown, I/O).

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use report::{Report, Status};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATION: u8 = 2;
pub const EXIT_ERROR: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "s2wb", version, about = "Seeded verification runs for sigma_2(D^2 u) = 1")]
struct Cli {
    /// Worker threads; falls back to S2WB_THREADS, then to all cores.
    /// Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Also write checks and tables as CSV files into this directory.
    #[arg(long, global = true)]
    csv_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certificate suite on sampled constraint points and tangent jets.
    VerifyJacobi(JacobiArgs),
    /// Identities, range and ellipticity of the transformed equation.
    VerifyTransform(TransformArgs),
    /// One Dirichlet solve, its transform and the superharmonicity check.
    Solve(SolveArgs),
    /// Hessian oscillation of the transformed potential across box sizes.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct JacobiArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Semiconvexity constant K (`inf` drops the floor; needs --j-override).
    #[arg(long, default_value_t = 1.0)]
    pub k_semiconvex: f64,
    /// Shift J; defaults to 8nK/3.
    #[arg(long)]
    pub j_override: Option<f64>,
    /// Exponent ε; defaults to 1/3. Other values are exploratory.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub k_semiconvex: f64,
    /// Shift K̄ of the transform; must exceed K.
    #[arg(long)]
    pub kbar: Option<f64>,
    #[arg(long, default_value_t = 50_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include the family along which one eigenvalue grows to 1e6.
    #[arg(long)]
    pub ray: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryKind {
    /// t|x|²/2.
    Quadratic,
    /// t|x|²/2 + 0.1 Π cos x_k.
    Perturbed,
    /// t|x|²/2 + 0.1 Π cos(π x_k / R).
    BoxMode,
}

impl BoundaryKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::Perturbed => "perturbed",
            Self::BoxMode => "box-mode",
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 65)]
    pub m: usize,
    /// Half-width R of the box [-R, R]ⁿ.
    #[arg(long, default_value_t = 2.0)]
    pub extent: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k_semiconvex: f64,
    #[arg(long, value_enum, default_value_t = BoundaryKind::Perturbed)]
    pub boundary: BoundaryKind,
    #[arg(long, default_value_t = s2wb_core::tolerances::NEWTON_TOLERANCE)]
    pub tol: f64,
    #[arg(long, default_value_t = s2wb_core::tolerances::NEWTON_MAX_ITER)]
    pub max_iter: usize,
    /// Write `u.s2grid` and `w.s2grid` here.
    #[arg(long)]
    pub grid_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Grid size; repeat for a refinement comparison.
    #[arg(long = "m", default_values_t = vec![65])]
    pub m: Vec<usize>,
    /// Box half-widths, increasing.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 4.0, 8.0])]
    pub extents: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub k_semiconvex: f64,
    #[arg(long, value_enum, default_value_t = BoundaryKind::Perturbed)]
    pub boundary: BoundaryKind,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    if let Some(t) = flag {
        return Ok(Some(t));
    }
    match std::env::var("S2WB_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("S2WB_THREADS = {v:?} is not a thread count")),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    let threads = thread_count(cli.threads)?;
    if threads == Some(0) {
        return Err("thread count must be at least 1".into());
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| e.to_string())?;

    let start = Instant::now();
    let report: Report = pool.install(|| match &cli.command {
        Command::VerifyJacobi(a) => commands::verify_jacobi(a),
        Command::VerifyTransform(a) => commands::verify_transform(a),
        Command::Solve(a) => commands::solve(a),
        Command::Experiment(a) => commands::experiment(a),
    });
    let wall = start.elapsed().as_secs_f64();

    let body = serde_json::to_string_pretty(&report.to_json(wall)).map_err(|e| e.to_string())?;
    match &cli.out {
        Some(path) => std::fs::write(path, body + "\n").map_err(|e| format!("{}: {e}", path.display()))?,
        None => println!("{body}"),
    }
    if let Some(dir) = &cli.csv_dir {
        report.write_csv_dir(dir)?;
    }
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    for c in report.checks.iter().filter(|c| c.hard && !c.ok()) {
        eprintln!("violated: {} ({} of {}, worst margin {:e})", c.name, c.count - c.passed, c.count, c.worst_margin);
    }
    Ok(match report.status() {
        Status::Pass => EXIT_OK,
        Status::Violation => EXIT_VIOLATION,
        Status::Error => EXIT_ERROR,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
