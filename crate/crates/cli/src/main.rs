//! `tdlimit` command-line interface.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, RawArgs, RunConfig};
use error::{CliError, Result};

#[derive(Parser)]
#[command(name = "tdlimit", version, about = "Deterministic limit of multiagent TD learning")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Iterate the learning map from x0 until convergence or --steps.
    Traj {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: Option<usize>,
        /// Stop once successive profiles differ by less than this (max norm).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Also write a TD direction field on a grid with this many cells per
        /// axis (default 12) to <out>.grid.csv.
        #[arg(long, num_args = 0..=1, default_missing_value = "12")]
        grid: Option<usize>,
    },
    /// Bifurcation scan over one parameter.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["alpha", "beta", "gamma"])]
        axis: Option<String>,
        /// Comma list or start:stop:step.
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
        #[arg(long)]
        transient: Option<usize>,
        #[arg(long)]
        record: Option<usize>,
    },
    /// Lyapunov spectrum along the orbit of x0.
    Lyap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        transient: Option<usize>,
    },
    /// Compare Monte-Carlo batch TD errors with the infinite-batch limit.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Comma list of batch sizes.
        #[arg(long)]
        ks: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Independent batches per batch size.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Write a built-in or loaded game as a game file.
    ExportGame {
        #[arg(long)]
        game: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Built-in name (matching-pennies, prisoners-dilemma) or game file.
    #[arg(long)]
    game: Option<String>,
    #[arg(long, value_parser = ["q", "sarsa", "ac"])]
    learner: Option<String>,
    /// Scalar or one value per agent.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// `uniform`, a full agent-major list, or first-action probabilities.
    #[arg(long)]
    x0: Option<String>,
    /// Take the whole run configuration from an output file's header.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn raw(&self) -> RawArgs {
        RawArgs {
            game: self.game.clone(),
            learner: self.learner.clone(),
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            gamma: self.gamma.clone(),
            x0: self.x0.clone(),
            ..RawArgs::default()
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (command, common, raw) = match cli.command {
        Sub::ExportGame { game, out } => {
            let (_, game) = config::resolve_game(&game)?;
            return commands::export_game(&game, out.as_deref());
        }
        Sub::Traj { common, steps, epsilon, grid } => {
            let raw = RawArgs { steps, epsilon, grid, ..common.raw() };
            (Command::Traj, common, raw)
        }
        Sub::Scan { common, axis, values, transient, record } => {
            let raw = RawArgs { axis, values, transient, record, ..common.raw() };
            (Command::Scan, common, raw)
        }
        Sub::Lyap { common, steps, transient } => {
            let raw = RawArgs { steps, transient, ..common.raw() };
            (Command::Lyap, common, raw)
        }
        Sub::Validate { common, ks, seed, seeds } => {
            let raw = RawArgs { ks, seed, seeds, ..common.raw() };
            (Command::Validate, common, raw)
        }
    };

    let config = match &common.config {
        Some(path) => {
            if raw != RawArgs::default() {
                return Err(CliError::config("--config cannot be combined with run flags"));
            }
            let cfg = RunConfig::from_file(path)?;
            if cfg.command != command {
                return Err(CliError::config(format!(
                    "--config holds a {} run, not {}",
                    cfg.command.name(),
                    command.name()
                )));
            }
            cfg
        }
        None => raw.resolve(command)?,
    };
    let run = config.load()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(CliError::config("--jobs must be at least 1"));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let out = common.out.as_deref();
    pool.install(|| match command {
        Command::Traj => commands::traj(&run, out),
        Command::Scan => commands::scan(&run, out),
        Command::Lyap => commands::lyap(&run, out),
        Command::Validate => commands::validate(&run, out),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tdlimit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
