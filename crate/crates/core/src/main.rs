use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use moist_column::cli::{self, VerifySource};
use moist_column::verify::VerifyConfig;

#[derive(Parser)]
#[command(
    name = "moist-column",
    about = "Single-column moist convection by measure-preserving parcel rearrangement",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for ensemble and check execution (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct CommonRunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output block).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for sampling and member RNG streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Skip per-step invariant validation (performance runs).
    #[arg(long)]
    no_validate: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one deterministic column and export its trajectory.
    Simulate(CommonRunArgs),
    /// Run every member of a probabilistic initial ensemble.
    Ensemble(CommonRunArgs),
    /// Run the verification battery on a config or an exported run.
    Verify {
        #[arg(long, conflicts_with = "trajectory")]
        config: Option<PathBuf>,
        /// Directory holding meta.json / states.jsonl / reports.jsonl.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the check samplers.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Refinement study: rerun the same physics across resolutions.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated resolutions, e.g. 8,16,32,64.
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy table and minimality certificate for an exported run.
    Energy {
        /// Directory holding an exported trajectory.
        trajectory: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    let outcome = match &cli.command {
        Command::Simulate(args) => {
            cli::cmd_simulate(&args.config, args.out.as_deref(), !args.no_validate, args.seed)
        }
        Command::Ensemble(args) => {
            cli::cmd_ensemble(&args.config, args.out.as_deref(), !args.no_validate, args.seed)
        }
        Command::Verify {
            config,
            trajectory,
            out,
            seed,
        } => {
            let mut vcfg = VerifyConfig::default();
            if let Some(s) = seed {
                vcfg.seed = *s;
            }
            match (config, trajectory) {
                (Some(c), None) => cli::cmd_verify(VerifySource::Config(c), out.as_deref(), &vcfg),
                (None, Some(t)) => {
                    cli::cmd_verify(VerifySource::Trajectory(t), out.as_deref(), &vcfg)
                }
                _ => Err(moist_column::Error::Config(
                    "verify needs exactly one of --config or --trajectory".into(),
                )),
            }
        }
        Command::Converge { config, n_list, out } => {
            cli::cmd_converge(config, n_list, out.as_deref(), &VerifyConfig::default())
        }
        Command::Energy { trajectory, out } => cli::cmd_energy(trajectory, out.as_deref()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
