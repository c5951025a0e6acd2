use std::path::PathBuf;
use std::process::ExitCode;

use adjrom_cli::commands::{self, RunOptions};
use adjrom_cli::config::RunConfig;
use adjrom_cli::{report, CliError};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "adjrom",
    version,
    about = "Transient topology optimization with a reduced adjoint"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve at the uniform starting design.
    Forward(RunArgs),
    /// Compare the adjoint gradient with central finite differences.
    Gradcheck(RunArgs),
    /// Build the reduced basis and error estimators.
    Offline(RunArgs),
    /// Run the optimization loop.
    Optimize(RunArgs),
    /// Render SVG plots from artifact directories.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides rom.seed and the gradient-check probe seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Artifact directories from previous runs.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    /// Where to write the plots (defaults to the first artifact directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, cmd): (
        &RunArgs,
        fn(&RunConfig, &RunOptions) -> Result<(), CliError>,
    ) = match &cli.command {
        Command::Report(r) => {
            let out = r.out.clone().unwrap_or_else(|| r.dirs[0].clone());
            return report::run(&r.dirs, &out);
        }
        Command::Forward(a) => (a, commands::forward),
        Command::Gradcheck(a) => (a, commands::gradcheck),
        Command::Offline(a) => (a, commands::offline),
        Command::Optimize(a) => (a, commands::optimize),
    };
    let cfg = RunConfig::load(&args.config)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.directory.clone())
        .ok_or_else(|| {
            CliError::Validation("no output directory: pass --out or set output.directory".into())
        })?;
    let opts = RunOptions {
        out,
        seed: args.seed,
        force: args.force,
    };
    cmd(&cfg, &opts)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
