use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod figure;
mod output;
mod registry;

use commands::{Curve, Kernel, MarkovArgs, ResetFreeArgs, Rule};
use config::RunConfig;
use registry::ModelSpec;

#[derive(Parser)]
#[command(name = "ffprep", version, about = "Measurement-feedback ground-state preparation for frustration-free models")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (TOML, or a manifest.json from an earlier run)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overriding the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long, global = true, env = "FFPREP_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory ensemble from a configuration file
    Run,
    /// Exact gaps over a list of sizes and the dynamical-exponent fit
    Gap {
        /// Model name
        #[arg(long)]
        model: String,
        /// Linear sizes, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Extra model parameters as key=value
        #[arg(long = "param")]
        params: Vec<String>,
        #[arg(long)]
        allow_large: bool,
    },
    /// Data bundle for one figure
    Figure {
        /// One of fig1b, fig2, fig3a, fig3b, fig4a, fig4b, sm-markov, sm-cluster
        id: String,
        #[arg(long, default_value_t = 500)]
        trajectories: usize,
    },
    /// Single-particle reset process
    Markov {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 32)]
        length: usize,
        /// Rounds to simulate; defaults to 3.2/Δ
        #[arg(long)]
        t_max: Option<usize>,
        #[arg(long, default_value_t = 2000)]
        trajectories: usize,
        #[arg(long, value_enum, default_value_t = Rule::TwiceEnergy)]
        rule: Rule,
        #[arg(long, value_enum, default_value_t = Curve::Exact)]
        energy: Curve,
        #[arg(long, value_enum, default_value_t = Kernel::Exact)]
        kernel: Kernel,
    },
    /// Reset-free projection rounds, eigenvalue correspondence and the detectability check
    Resetfree {
        /// Model name; alternatively take the model from --config
        #[arg(long)]
        model: Option<String>,
        #[arg(long = "param")]
        params: Vec<String>,
        #[arg(long)]
        allow_large: bool,
        #[arg(long, default_value_t = 200)]
        rounds: usize,
        /// Leading eigenvectors of the symmetrized round to follow; 0 skips
        #[arg(long, default_value_t = 4)]
        states: usize,
        #[arg(long, default_value_t = 10)]
        window_start: usize,
        #[arg(long, default_value_t = 60)]
        window_end: usize,
        /// Random states for the detectability check; 0 skips
        #[arg(long, default_value_t = 100)]
        dl_trials: usize,
    },
}

fn out_dir(g: &Global, default: &str) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Run => {
            let path = g.config.as_ref().context("run needs --config")?;
            let mut cfg = RunConfig::load(path)?;
            if let Some(s) = g.seed {
                cfg.ensemble.master_seed = s;
            }
            if let Some(o) = &g.out {
                cfg.output.directory = o.clone();
            }
            let dir = commands::run(&cfg)?;
            emit(&dir.display().to_string())?;
        }
        Command::Gap { model, sizes, params, allow_large } => {
            let overrides = registry::parse_overrides(&params)?;
            let report = commands::gap(&model, &sizes, &overrides, allow_large, g.out.as_deref())?;
            emit(&serde_json::to_string_pretty(&report)?)?;
        }
        Command::Figure { id, trajectories } => {
            let o = figure::FigureOptions { n_trajectories: trajectories, seed: g.seed.unwrap_or(0) };
            let dir = out_dir(g, &format!("ffprep-{id}"));
            figure::figure(&id, &o, &dir)?;
            emit(&dir.display().to_string())?;
        }
        Command::Markov { dim, length, t_max, trajectories, rule, energy, kernel } => {
            let a = MarkovArgs { dim, length, t_max, n_trajectories: trajectories, rule, curve: energy, kernel, seed: g.seed.unwrap_or(0) };
            let dir = out_dir(g, "ffprep-markov");
            commands::markov(&a, &dir)?;
            emit(&dir.display().to_string())?;
        }
        Command::Resetfree { model, params, allow_large, rounds, states, window_start, window_end, dl_trials } => {
            let spec = match (model, &g.config) {
                (Some(name), _) => ModelSpec { name, parameters: registry::parse_overrides(&params)?, allow_large },
                (None, Some(path)) => RunConfig::load(path)?.model,
                (None, None) => anyhow::bail!("resetfree needs --model or --config"),
            };
            let a = ResetFreeArgs { rounds, states, window: (window_start, window_end), dl_trials, seed: g.seed.unwrap_or(0) };
            let dir = out_dir(g, "ffprep-resetfree");
            commands::resetfree(&spec, &a, &dir)?;
            emit(&dir.display().to_string())?;
        }
    }
    Ok(())
}

/// Writes a line to stdout; a closed pipe (`| head`) is not an error.
fn emit(line: &str) -> anyhow::Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
