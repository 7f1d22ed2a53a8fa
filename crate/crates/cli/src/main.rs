use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Preisach hysteresis operators: forward evaluation, inversion and
/// verification of the stability bounds.
#[derive(Debug, Parser)]
#[command(name = "preisach", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Density model: a JSON config path or one of the presets exp, cauchy,
    /// uniform, zero. For `piezo` a piezo JSON config path.
    #[arg(long, global = true)]
    pub model: Option<String>,

    /// Discretization level (number of threshold layers).
    #[arg(long, global = true, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,

    /// Root-finding tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,

    /// Seed for randomly generated signals.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Input CSV files; their meaning depends on the command.
    #[arg(long = "in", global = true)]
    pub inputs: Vec<PathBuf>,

    /// Output CSV file; standard output if omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Threshold radius of the discretization; derived from the inputs if
    /// omitted.
    #[arg(long, global = true)]
    pub radius: Option<f64>,

    /// Number of random trials or signals for randomized commands.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// w = q + P_k(u)[q]. Inputs: q [u].
    Forward,
    /// Solve q + P_k(u)[q] = w. Inputs: w [u].
    Invert,
    /// Max error of invert(forward(q)) over random q.
    Roundtrip,
    /// Stability bounds for two inputs. Inputs: w w_hat [u u_hat], or random.
    Stability,
    /// Sup error of P_k against a fine reference for k = 4, 16, 64, 256.
    ErrorStudy,
    /// Oscillation bound between consecutive grid points. Inputs: w [u], or random.
    Regularity,
    /// Thermo-piezoelectric equation. Inputs: E [eps [theta]].
    Piezo,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PREISACH_LOG", "warn")).init();
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
