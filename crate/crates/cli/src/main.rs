//! `blendchaos` command-line front end.

mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Simulate hydrogen-blended gas pipeline transients, detect chaos and map
/// chaotic regions of the forcing plane.
#[derive(Debug, Parser)]
#[command(name = "blendchaos", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat `key = value` configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Forcing frequency in cycles per hour.
    #[arg(long)]
    omega: Option<f64>,
    /// Relative forcing amplitude in [0, 1].
    #[arg(long)]
    kappa: Option<f64>,
    /// Feedback gain in m²·s/kg.
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation from the steady state and write the outlet/inlet
    /// observables as CSV.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a perturbed pair and print the chaos measure.
    Chaos {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a resumable parameter sweep into a line-delimited JSON store.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Frequency grid `start:end:count` in cycles per hour.
        #[arg(long, default_value = "0:2:21")]
        grid_omega: String,
        /// Amplitude grid `start:end:count`.
        #[arg(long, default_value = "0.5:1:15")]
        grid_kappa: String,
        /// Comma-separated feedback gains.
        #[arg(long, default_value = "0,0.0025,0.006")]
        gains: String,
        /// Worker threads.
        #[arg(long, env = "BLENDCHAOS_JOBS")]
        jobs: Option<usize>,
        #[arg(long)]
        store: PathBuf,
        /// Continue an existing store instead of refusing to touch it.
        #[arg(long)]
        resume: bool,
    },
    /// Extract chaotic-interface curves from a sweep store.
    Interface {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Output prefix for `<prefix>_mu_<gain>.csv` files and `<prefix>.svg`.
        #[arg(long)]
        out: String,
    },
    /// Plot outlet phase portraits from a trajectory CSV.
    PhasePortrait {
        #[arg(long)]
        traj: PathBuf,
        /// Window start in hours.
        #[arg(long, default_value_t = 75.0)]
        t_start: f64,
        /// Window end in hours.
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Simulate { run, out } => commands::simulate(&run.into(), &out),
        Command::Chaos { run } => commands::chaos(&run.into()),
        Command::Sweep {
            config,
            grid_omega,
            grid_kappa,
            gains,
            jobs,
            store,
            resume,
        } => commands::sweep(&commands::SweepArgs {
            config,
            grid_omega,
            grid_kappa,
            gains,
            jobs,
            store,
            resume,
        }),
        Command::Interface {
            store,
            threshold,
            out,
        } => commands::interface(&store, threshold, &out),
        Command::PhasePortrait {
            traj,
            t_start,
            t_end,
            out,
        } => commands::phase_portrait(&traj, t_start, t_end, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

impl From<RunArgs> for commands::RunOverrides {
    fn from(a: RunArgs) -> Self {
        Self {
            config: a.config,
            omega: a.omega,
            kappa: a.kappa,
            mu: a.mu,
        }
    }
}
