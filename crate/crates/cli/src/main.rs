use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wrtr_cli::{run_baseline, run_monte_carlo, run_staf, run_wrtr, BaselineMethod, RunOptions};

#[derive(Parser)]
#[command(
    name = "wrtr",
    version,
    about = "Worst-case robust slow-time sequence design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output_dir`, then
    /// `out/<scenario>/<command>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn options(self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            out: self.out,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Robust design by worst-case alternation.
    Wrtr {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Non-robust and unoptimized comparison designs.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        method: BaselineMethod,
        #[command(flatten)]
        common: Common,
    },
    /// SCR statistics of saved designs under random steering errors.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        /// TOML file with `[[design]]` entries `name` and `path`.
        #[arg(long)]
        designs: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute the STAF of a saved sequence.
    Staf {
        #[arg(long)]
        sequence: PathBuf,
        /// Scenario used for Doppler cuts and the clutter-cell mean.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Wrtr { config, common } => run_wrtr(&config, &common.options()),
        Command::Baseline {
            config,
            method,
            common,
        } => run_baseline(&config, method, &common.options()),
        Command::Montecarlo {
            config,
            designs,
            common,
        } => run_monte_carlo(&config, &designs, &common.options()),
        Command::Staf {
            sequence,
            config,
            common,
        } => run_staf(&sequence, config.as_deref(), &common.options()),
    };
    match result {
        Ok(report) => {
            println!(
                "{}: wrote {} files to {}",
                report.command,
                report.files.len(),
                report.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
