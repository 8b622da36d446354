//! Command-line driver: reference generation, agent training, extrapolation
//! evaluation against the fixed-filter and unfiltered baselines, and metric
//! comparison across runs.

mod commands;
mod csvio;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use efrl_core::config::{Profile, RunConfig};
use efrl_core::env::Variant;

#[derive(Parser)]
#[command(
    name = "efrl",
    version,
    about = "Evolve-Filter regularization with a learned filter radius"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the fine-grid reference simulation and store its coarse
    /// projections as training/evaluation references.
    GenDns {
        #[command(flatten)]
        run: RunArgs,
        /// Window to cover: the variant's training window, or the full
        /// horizon needed for evaluation.
        #[arg(long, value_parser = ["train", "full"], default_value = "train")]
        window: String,
    },
    /// Train a filter-radius agent.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Reference snapshot directory (defaults to <out>/refs).
        #[arg(long)]
        refs: Option<PathBuf>,
    },
    /// Roll out a trained policy greedily over the full horizon and compare
    /// it against the unfiltered and fixed-Kolmogorov-filter baselines.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint to evaluate (defaults to <out>/checkpoint_final.efdq).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Full-window reference directory (defaults to <out>/refs-full,
        /// generated on demand when absent).
        #[arg(long)]
        refs: Option<PathBuf>,
    },
    /// Tabulate evaluation metrics across run directories.
    Compare {
        /// Run directories (each holding eval/summary.json) or summary files.
        dirs: Vec<PathBuf>,
        /// Write the merged table to this CSV file instead of stdout only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the fully resolved configuration.
    ConfigDump {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter profile the defaults come from.
    #[arg(long, value_parser = ["paper", "ci"])]
    profile: Option<String>,
    /// Training variant.
    #[arg(long, value_parser = ["dd", "dd-rand", "df", "sp-df"])]
    variant: Option<String>,
    /// Training / agent seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Initial-condition seed.
    #[arg(long)]
    ic_seed: Option<u64>,
    /// Episode budget.
    #[arg(long)]
    episodes: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let profile = match self.profile.as_deref() {
                    Some(p) => Profile::parse(p)?,
                    None => Profile::Paper,
                };
                let variant = match self.variant.as_deref() {
                    Some(v) => Variant::parse(v)?,
                    None => Variant::Df,
                };
                RunConfig::new(profile, variant)
            }
        };
        if self.config.is_some() {
            if let Some(p) = self.profile.as_deref() {
                cfg.profile = Profile::parse(p)?;
            }
            if let Some(v) = self.variant.as_deref() {
                cfg.variant = Variant::parse(v)?;
            }
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(seed) = self.ic_seed {
            cfg.ic_seed = seed;
        }
        if let Some(episodes) = self.episodes {
            cfg.episodes = episodes;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenDns { run, window } => {
            let cfg = run.resolve()?;
            commands::gen_dns::run(&cfg, window == "full")
        }
        Command::Train { run, refs } => {
            let cfg = run.resolve()?;
            commands::train::run(&cfg, refs)
        }
        Command::Eval {
            run,
            checkpoint,
            refs,
        } => {
            let cfg = run.resolve()?;
            commands::eval::run(&cfg, checkpoint, refs)
        }
        Command::Compare { dirs, out } => commands::compare::run(&dirs, out),
        Command::ConfigDump { run } => {
            let cfg = run.resolve()?;
            print!("{}", cfg.dump());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// Exit codes: 2 for configuration problems, 3 for a reference-run blow-up,
/// 1 otherwise.
fn classify(err: &anyhow::Error) -> u8 {
    if err
        .downcast_ref::<commands::gen_dns::BlowUpAbort>()
        .is_some()
    {
        return 3;
    }
    if let Some(core) = err.downcast_ref::<efrl_core::Error>() {
        if matches!(core, efrl_core::Error::Config(_)) {
            return 2;
        }
    }
    1
}
