use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sgdlab_cli::commands::{self, KlOptions, RunOptions, XiOptions};
use sgdlab_cli::config::ExperimentConfig;
use sgdlab_cli::error::CliResult;
use sgdlab_core::diagnostics::SampleSide;
use sgdlab_core::schedule::BoundsChannel;

/// Stochastic gradient descent laboratory.
///
/// Experiments are described by a TOML config (objective, noise oracle,
/// stepsize schedule, run grid). Ensembles run in parallel; set
/// RAYON_NUM_THREADS to bound the worker count (default: all cores).
/// Results are bit-reproducible for a fixed seed at any worker count.
#[derive(Parser)]
#[command(name = "sgdlab", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ChannelArg {
    /// Tight bounds derived from the implemented sampling law.
    Derived,
    /// Conventional coarse constants for the noise family.
    Nominal,
}

impl From<ChannelArg> for BoundsChannel {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Derived => BoundsChannel::Derived,
            ChannelArg::Nominal => BoundsChannel::Nominal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Below,
    Above,
}

impl From<SideArg> for SampleSide {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Below => SampleSide::Below,
            SideArg::Above => SampleSide::Above,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the stepsize/bound sequence conditions on both channels.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Channel deciding the exit verdict.
        #[arg(long, value_enum, default_value_t = ChannelArg::Derived)]
        channel: ChannelArg,
        /// Truncation horizon for the sequence checks (defaults to run.k_max).
        #[arg(long)]
        k_max: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one seeded trajectory and write its CSV/JSON (and optional SVG).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Initial point (defaults to the first entry of run.x0).
        #[arg(long, allow_negative_numbers = true)]
        x0: Option<f64>,
        /// Noise level (defaults to the first sweep level).
        #[arg(long)]
        level: Option<f64>,
        /// Also write an SVG plot of the trajectory.
        #[arg(long)]
        plot: bool,
        /// Run even if the schedule checks fail.
        #[arg(long)]
        force: bool,
        #[arg(long, value_enum, default_value_t = ChannelArg::Derived)]
        channel: ChannelArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full experiment grid and print/write the outcome table.
    Table {
        #[arg(long)]
        config: PathBuf,
        /// Master seed override for the whole grid.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = ChannelArg::Derived)]
        channel: ChannelArg,
        #[arg(long)]
        force: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probe the per-iteration descent event on a stored run.
    Xi {
        #[arg(long)]
        config: PathBuf,
        /// Path to a run artifact JSON written by `run`.
        #[arg(long)]
        run: PathBuf,
        /// Comma-separated probe iterations (default: a log-spaced panel).
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<u64>>,
        #[arg(long, value_enum, default_value_t = ChannelArg::Derived)]
        channel: ChannelArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the local gradient-inequality exponent near a catalog component.
    Kl {
        #[arg(long)]
        config: PathBuf,
        /// Catalog index of the component (see the error message for a list).
        #[arg(long)]
        component: usize,
        #[arg(long, value_enum, default_value_t = SideArg::Below)]
        side: SideArg,
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        #[arg(long, default_value_t = 512)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render the SVG plot of a stored run from its embedded metadata.
    Plot {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Check { config, channel, k_max, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            commands::cmd_check(&cfg, channel.into(), k_max, &out)
        }
        Command::Run { config, seed, x0, level, plot, force, channel, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            commands::cmd_run(
                &cfg,
                &RunOptions { seed, x0, level, plot, force, channel: channel.into(), out },
            )
        }
        Command::Table { config, seed, channel, force, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.run.seed = seed;
            }
            commands::cmd_table(&cfg, channel.into(), force, &out)
        }
        Command::Xi { config, run, ks, channel, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            commands::cmd_xi(&cfg, &XiOptions { run, ks, channel: channel.into(), out })
        }
        Command::Kl { config, component, side, radius, samples, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            commands::cmd_kl(
                &cfg,
                &KlOptions { component, side: side.into(), radius, samples, out },
            )
        }
        Command::Plot { run, out } => commands::cmd_plot(&run, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
