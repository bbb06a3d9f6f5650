//! Command-line front-end: configuration files, the `solve`, `diagnose`,
//! `oracle` and `sweep` subcommands, and their output files.

pub mod commands;
pub mod config;
pub mod exit;
pub mod output;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{cmd_diagnose, cmd_oracle, cmd_solve, cmd_sweep, OracleArgs};
use exit::{CliError, ExitCode};

#[derive(Debug, Parser)]
#[command(name = "slbvp", version, about = "Second boundary value problem for the special Lagrangian curvature equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the continuation solver described by a config file.
    Solve { config: PathBuf },
    /// Check the a-priori estimates on a state written by `solve`.
    Diagnose {
        state: PathBuf,
        /// Second state of the same problem, for the uniqueness check.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Directory for diagnostics.json (default: next to the state).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Radial shooting solution for concentric discs.
    Oracle {
        #[arg(long)]
        rho_src: f64,
        #[arg(long)]
        rho_tgt: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// RK4 steps in ln r.
        #[arg(long)]
        steps: Option<usize>,
        /// Directory for profile.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve at every resolution in the config's "resolutions" list.
    Sweep { config: PathBuf },
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Solve { config } => {
            let out = cmd_solve(&config)?;
            match (out.summary.c, &out.summary.failure) {
                (Some(c), _) => println!("converged: c = {c}"),
                (None, Some(f)) => eprintln!(
                    "continuation failed ({:?}) at t = {}; last converged t = {:?}",
                    f.kind, f.t_failed, f.t_reached
                ),
                _ => {}
            }
            Ok(out.exit)
        }
        Command::Diagnose { state, compare, out } => {
            let res = cmd_diagnose(&state, compare.as_deref(), out.as_deref())?;
            let failures = res.report.failures();
            if failures.is_empty() {
                println!("all checks passed");
            } else {
                println!("failed checks: {}", failures.join(", "));
            }
            Ok(res.exit)
        }
        Command::Oracle {
            rho_src,
            rho_tgt,
            t,
            n,
            tol,
            steps,
            out,
        } => {
            let args = OracleArgs {
                rho_src,
                rho_tgt,
                n,
                t,
                tol,
                steps,
            };
            let p = cmd_oracle(&args, out.as_deref())?;
            println!("c = {}", p.c);
            Ok(ExitCode::Ok)
        }
        Command::Sweep { config } => {
            let out = cmd_sweep(&config)?;
            for r in &out.rows {
                let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.10}"));
                println!(
                    "{}x{}: c = {}, error = {}, exit {}",
                    r.n_r,
                    r.n_phi,
                    show(r.c),
                    r.error.map_or("-".to_string(), |e| format!("{e:.3e}")),
                    r.exit_code
                );
            }
            Ok(out.exit)
        }
    }
}

/// Parses `args` (including the program name) and runs the subcommand;
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::Config.code() } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.code.code()
        }
    }
}
