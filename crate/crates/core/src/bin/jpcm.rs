use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use jpcm_core::harness::{self, CsvLog, Rmse, Scenario};
use jpcm_core::{JpcmError, Result};

/// Closed-loop quadrotor experiments with joint positioning and control.
#[derive(Parser)]
#[command(name = "jpcm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and optionally write its log.
    Run {
        /// Scenario TOML file, or the name of a built-in scenario.
        #[arg(long)]
        config: String,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the run log as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record solve wall times in the CSV (makes output non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Print the tracking RMSE of a logged run.
    Rmse {
        #[arg(long)]
        log: PathBuf,
        /// Initial interval excluded from the RMSE, seconds.
        #[arg(long, default_value_t = 1.0)]
        transient: f64,
    },
    /// Print an RMSE table for several logged runs.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        logs: Vec<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        transient: f64,
    },
    /// List the built-in scenarios.
    List,
}

fn load_scenario(config: &str) -> Result<Scenario> {
    let path = Path::new(config);
    if path.exists() {
        Scenario::load(path)
    } else {
        harness::builtin(config).map_err(|_| {
            JpcmError::Config(format!("{config:?} is neither a file nor a built-in scenario"))
        })
    }
}

fn table_header() {
    println!(
        "{:<28} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "run", "p_x [m]", "p_y [m]", "p_z [m]", "r_x [rad]", "r_y [rad]", "r_z [rad]"
    );
}

fn table_row(name: &str, r: &Rmse) {
    println!(
        "{:<28} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
        name, r.position[0], r.position[1], r.position[2], r.rotation[0], r.rotation[1], r.rotation[2]
    );
}

fn rmse_of_log(log: &CsvLog, transient: f64) -> Result<Rmse> {
    harness::rmse_of(&log.error_samples(), transient)
}

/// Returns whether the command fully succeeded.
fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { config, seed, out, timing } => {
            let mut scenario = load_scenario(&config)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            let log = harness::run_scenario(&scenario)?;
            if let Some(path) = &out {
                harness::emit_csv(&log, path, timing)?;
            }
            let steps = log.records.len();
            let fallbacks = log.fallback_count();
            println!("{} ({}), seed {}: {steps} steps", scenario.name, scenario.mode, scenario.seed);
            if let Ok(r) = harness::compute_rmse(&log, scenario.transient) {
                table_header();
                table_row(&scenario.name, &r);
            }
            if fallbacks > 0 {
                eprintln!("solver failed on {fallbacks} step(s); last input was held");
            }
            if let Some(msg) = &log.failure {
                eprintln!("run stopped: {msg}");
            }
            Ok(log.failure.is_none() && fallbacks == 0)
        }
        Command::Rmse { log, transient } => {
            let parsed = harness::read_csv(&log)?;
            let r = rmse_of_log(&parsed, transient)?;
            table_header();
            table_row(&log.display().to_string(), &r);
            if let Some(msg) = &parsed.failure {
                eprintln!("{}: run stopped: {msg}", log.display());
            }
            Ok(parsed.failure.is_none())
        }
        Command::Compare { logs, transient } => {
            let mut ok = true;
            table_header();
            for path in &logs {
                let parsed = harness::read_csv(path)?;
                let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
                table_row(&name, &rmse_of_log(&parsed, transient)?);
                if let Some(msg) = &parsed.failure {
                    eprintln!("{}: run stopped: {msg}", path.display());
                    ok = false;
                }
            }
            Ok(ok)
        }
        Command::List => {
            for (name, _) in harness::BUILTIN {
                println!("{name}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
