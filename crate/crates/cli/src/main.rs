use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use substatic_cli::app::{execute_one, exit_code, run_all, Overrides};
use substatic_cli::{ExperimentKind, OutputFormat};

/// Numerical checks of Reilly-type identities and geometric inequalities on
/// sub-static warped products.
///
/// The thread count is taken from SUBSTATIC_THREADS (default: all cores).
#[derive(Parser)]
#[command(name = "substatic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Multiply every grid count and the radial mesh by this factor.
    #[arg(long, global = true, default_value_t = 1.0)]
    grid_scale: f64,
    /// Multiply every tolerance by this factor.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    /// Reports go to <out-dir>/<name>/ (default: the config's, else ./out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Potential-weighted Reilly identity with a refinement table.
    VerifyReilly(ConfigArg),
    /// Heintze-Karcher inequality.
    CheckHk(ConfigArg),
    /// Minkowski inequality and identity.
    CheckMinkowski(ConfigArg),
    /// Weighted almost-Schur and Alexandrov-Fenchel inequalities.
    CheckAf(ConfigArg),
    /// Radial boundary value problem.
    Solve(ConfigArg),
    /// First Dirichlet eigenvalue of the radial operator.
    Eig(ConfigArg),
    /// Compare displayed closed forms of Q and Ricci with the derived ones.
    AuditFormulas(ConfigArg),
    /// Euclidean ball and sphere quadrature checks.
    Calibrate(ConfigArg),
    /// Every config in a directory.
    RunAll {
        #[arg(long, default_value = "configs")]
        configs: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = std::env::var("SUBSTATIC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let ov = Overrides {
        grid_scale: cli.grid_scale,
        tol_scale: cli.tol_scale,
        out_dir: cli.out_dir,
        format: cli.format,
    };
    let (kind, arg) = match cli.command {
        Command::VerifyReilly(a) => (ExperimentKind::VerifyReilly, a),
        Command::CheckHk(a) => (ExperimentKind::CheckHk, a),
        Command::CheckMinkowski(a) => (ExperimentKind::CheckMinkowski, a),
        Command::CheckAf(a) => (ExperimentKind::CheckAf, a),
        Command::Solve(a) => (ExperimentKind::Solve, a),
        Command::Eig(a) => (ExperimentKind::Eig, a),
        Command::AuditFormulas(a) => (ExperimentKind::AuditFormulas, a),
        Command::Calibrate(a) => (ExperimentKind::Calibrate, a),
        Command::RunAll { configs } => {
            return match run_all(&configs, &ov) {
                Ok(outcomes) => ExitCode::from(exit_code(&outcomes) as u8),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(4)
                }
            };
        }
    };
    let (outcome, _) = execute_one(arg.config.as_deref(), kind, &ov);
    println!("{}", outcome.line());
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    ExitCode::from(outcome.status.exit_code() as u8)
}
