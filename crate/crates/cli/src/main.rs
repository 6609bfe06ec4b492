// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fdlab::drift::DriftClass;
use fdlab::field::MixedNormSpec;
use fdlab_cli::batteries::VerifyOptions;
use fdlab_cli::{commands, configure_workers, scenario, CliError, Outcome};

/// Splitting solver and diagnostics for nonlinear diffusion with drift.
///
/// Exit codes: 0 pass, 1 violated check or compute failure, 2 usage or validation error.
/// The worker count is read from FDLAB_WORKERS.
#[derive(Parser)]
#[command(name = "fdlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and store the trajectory directory.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification battery on a trajectory directory.
    Verify {
        battery: String,
        dir: PathBuf,
        /// Drift class for `energy-budget` (S, S_tilde, S_scaling, D, D_plus, D_s).
        #[arg(long)]
        class: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        /// Spatial exponent of the drift norm (`inf` allowed).
        #[arg(long, default_value_t = f64::INFINITY)]
        q1: f64,
        /// Temporal exponent of the drift norm (`inf` allowed).
        #[arg(long, default_value_t = f64::INFINITY)]
        q2: f64,
        #[arg(long, default_value_t = 1e-2)]
        weak_tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Self-convergence study over a list of substep counts.
    Converge {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8, 16, 32, 64])]
        n: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise W2 and δ distances of a trajectory with Hölder fits.
    Distances {
        dir: PathBuf,
        #[arg(long, default_value_t = 16)]
        terms: usize,
        /// Class exponents `q,q1,q2` used for the guaranteed δ exponent.
        #[arg(long, value_delimiter = ',')]
        exponents: Option<Vec<f64>>,
    },
    /// Class membership report for a scenario's drift, as JSON on stdout.
    ClassifyDrift {
        scenario: PathBuf,
        #[arg(long)]
        class: String,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long)]
        q1: f64,
        #[arg(long)]
        q2: f64,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Run the fluid model of a scenario and check its energy bound.
    Boussinesq {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<Outcome, CliError> {
    configure_workers()?;
    match cli.command {
        Command::Run { scenario, out } => {
            let (dir, traj) = commands::run(&scenario, out.as_deref())?;
            eprintln!("wrote {} snapshots to {}", traj.snapshots.len(), dir.display());
            Ok(Outcome::Pass)
        }
        Command::Verify { battery, dir, class, q, q1, q2, weak_tolerance, seed } => {
            let opts = VerifyOptions { class, q, space: q1, time: q2, weak_tolerance, seed };
            let (report, outcome) = commands::verify(&battery, &dir, &opts)?;
            print_json(&report)?;
            Ok(outcome)
        }
        Command::Converge { scenario, n, out } => {
            let (report, dir) = commands::converge(&scenario, &n, out.as_deref())?;
            print!("{}", commands::convergence_csv(&report));
            eprintln!("wrote convergence.csv to {}", dir.display());
            Ok(Outcome::Pass)
        }
        Command::Distances { dir, terms, exponents } => {
            let class = match exponents.as_deref() {
                Some(&[q, q1, q2]) => Some((q, MixedNormSpec::new(q1, q2)?)),
                Some(other) => return Err(CliError::Usage(format!("--exponents takes `q,q1,q2`, got {} values", other.len()))),
                None => None,
            };
            let report = commands::distances(&dir, terms, class)?;
            print_json(&report)?;
            let within = report.delta_majorant.is_none_or(f64::is_finite) && report.w2_half_majorant.is_finite();
            Ok(Outcome::from_pass(within))
        }
        Command::ClassifyDrift { scenario: path, class, q, q1, q2, horizon } => {
            let s = scenario::load(&path)?;
            let report = commands::classify_drift(&s, DriftClass::parse(&class)?, q, MixedNormSpec::new(q1, q2)?, horizon)?;
            print_json(&report)?;
            Ok(Outcome::Pass)
        }
        Command::Boussinesq { scenario, out } => {
            let (report, outcome, dir) = commands::boussinesq(&scenario, out.as_deref())?;
            eprintln!("wrote {} states to {}", report.rows.len(), dir.display());
            print_json(&serde_json::json!({
                "scale": report.scale,
                "max_lhs": report.max_lhs,
                "bounded": report.bounded,
                "max_heat_drift": report.max_heat_drift,
                "kinetic_identity_residual": report.kinetic_identity_residual,
            }))?;
            Ok(outcome)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
