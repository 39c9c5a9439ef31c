use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "bgl", version, about = "Coupled belief and strategy learning in continuous games")]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    /// JSON on stdout.
    Machine,
}

/// Game selection shared by most subcommands.
#[derive(Args, Debug, Clone)]
pub struct GameArgs {
    /// Builtin game name (see `bgl examples list`).
    #[arg(long, conflicts_with = "config")]
    game: Option<String>,

    /// Take the game from the `[game]` table of a run configuration.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Observation noise for a builtin game.
    #[arg(long, requires = "game")]
    sigma: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the coupled dynamics from a configuration file.
    Simulate {
        config: PathBuf,
        /// Trajectory file (overrides output.trajectory).
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// JSON summary file (overrides output.summary).
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Keep every N-th stage in the trajectory file.
        #[arg(long)]
        record_every: Option<usize>,
    },
    /// Run a seed sweep described by a manifest.
    Sweep {
        manifest: PathBuf,
        /// JSON report file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        record_every: Option<usize>,
    },
    /// Equilibria of the game averaged under a belief.
    Equilibrium {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_delimiter = ',')]
        theta: Vec<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 8)]
        starts: usize,
    },
    /// Check whether (theta, q) is a fixed point of the dynamics.
    VerifyFixpoint {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_delimiter = ',')]
        theta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        q: Vec<f64>,
        #[arg(long, default_value_t = 1e-9)]
        kl_tol: f64,
        #[arg(long, default_value_t = 1e-8)]
        br_tol: f64,
    },
    /// Decay rate of a parameter's belief along a trajectory.
    Rate {
        #[command(flatten)]
        game: GameArgs,
        /// Trajectory file written by `simulate`; without it the run in
        /// --config is simulated.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Parameter label or index.
        #[arg(long)]
        param: String,
        #[arg(long, default_value_t = 0.5)]
        tail: f64,
    },
    /// Monte-Carlo test that belief ratios are martingales.
    MartingaleCheck {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_delimiter = ',')]
        theta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        q: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Local and global stability experiments.
    Stability {
        #[command(subcommand)]
        kind: StabilityCommand,
    },
    /// Belief thresholds for the local stability experiment.
    Thresholds {
        #[arg(long, value_delimiter = ',')]
        theta: Vec<f64>,
        #[arg(long)]
        epsilon_hat: f64,
        #[arg(long)]
        gamma: f64,
        /// Index of the true parameter.
        #[arg(long, default_value_t = 0)]
        true_index: usize,
    },
    /// Sufficient conditions for a fixed point to carry complete information.
    CompleteLearning {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_delimiter = ',')]
        theta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        q: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        xi: f64,
        #[arg(long, default_value_t = 500)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convergence of a learning rule with the belief held fixed.
    CheckStatic {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        rule: Option<String>,
        /// Number of random (belief, start) pairs.
        #[arg(long, default_value_t = 20)]
        starts: usize,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Builtin example games.
    Examples {
        #[command(subcommand)]
        kind: ExamplesCommand,
    },
}

#[derive(Subcommand, Debug)]
enum StabilityCommand {
    /// Fraction of runs started near a fixed point that stay near it.
    Local {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_delimiter = ',')]
        theta_bar: Vec<f64>,
        /// Equilibrium profile such as `0.5,0.5`; repeat for a set.
        #[arg(long = "eq", required = true)]
        eq: Vec<String>,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 0.1)]
        eps_bar: f64,
        #[arg(long, default_value_t = 0.1)]
        eps_x: f64,
        /// Initial belief radius; defaults to min(rho1, rho3) at epsilon_hat = eps_bar.
        #[arg(long)]
        eps1: Option<f64>,
        #[arg(long)]
        delta1: f64,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long, default_value_t = 2000)]
        horizon: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "sequential_br")]
        rule: String,
        /// Escape target belief.
        #[arg(long, value_delimiter = ',', requires = "escape_q")]
        escape_theta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        escape_q: Vec<f64>,
        #[arg(long, default_value_t = 1e-2)]
        escape_radius: f64,
    },
    /// Search a belief grid for incomplete-information fixed points.
    Global {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        #[arg(long, default_value_t = 1e-10)]
        q_tol: f64,
    },
}

#[derive(Subcommand, Debug)]
enum ExamplesCommand {
    List,
    /// Print (or write) the run configuration of a builtin game.
    Export {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("BGL_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| format!("BGL_THREADS: expected a positive integer, got {v:?}"))?;
        if n == 0 {
            return Err("BGL_THREADS: must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match commands::dispatch(cli.command, cli.format) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
