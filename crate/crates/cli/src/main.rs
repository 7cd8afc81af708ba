//! `levyexit`: runs theory computations and Monte Carlo campaigns from a
//! JSON experiment config and writes CSV/JSON artefacts plus a run manifest.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "levyexit", version, about = "Exit times and metastability of SPDEs with small heavy-tailed noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for the campaign pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exit rates, scales and the generator matrix.
    Theory(Common),
    /// First-exit campaign: per-trial CSV and summary.
    Exit(Common),
    /// Exit-locus campaign on half-space test sets.
    Locus(Common),
    /// Long paths between basins; empirical generator.
    Metastable(Common),
    /// Exact-law checks of the exit models.
    ModelsCheck(Common),
    /// Small-deviation probe before the first large jump.
    Probe(Common),
    /// Fixed points, basin radii and the relaxation constant.
    Deterministic(Common),
    /// Sampled growth and Lipschitz reports of the noise coefficient.
    Validate(Common),
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Experiment config (JSON).
    #[arg(value_name = "CONFIG")]
    config_pos: Option<PathBuf>,

    /// Experiment config (JSON); alternative to the positional argument.
    #[arg(long, conflicts_with = "config_pos")]
    config: Option<PathBuf>,

    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory; defaults to `output_dir` from the config, then `levyexit-output`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn config_path(&self) -> Option<&PathBuf> {
        self.config.as_ref().or(self.config_pos.as_ref())
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Theory(_) => "theory",
            Command::Exit(_) => "exit",
            Command::Locus(_) => "locus",
            Command::Metastable(_) => "metastable",
            Command::ModelsCheck(_) => "models-check",
            Command::Probe(_) => "probe",
            Command::Deterministic(_) => "deterministic",
            Command::Validate(_) => "validate",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Theory(c)
            | Command::Exit(c)
            | Command::Locus(c)
            | Command::Metastable(c)
            | Command::ModelsCheck(c)
            | Command::Probe(c)
            | Command::Deterministic(c)
            | Command::Validate(c) => c,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot size the worker pool: {e}")))?;
    }
    let common = cli.command.common();
    let run = commands::prepare(cli.command.name(), common)?;
    let outputs = match &cli.command {
        Command::Theory(_) => commands::theory(&run)?,
        Command::Exit(_) => commands::exit(&run)?,
        Command::Locus(_) => commands::locus(&run)?,
        Command::Metastable(_) => commands::metastable(&run)?,
        Command::ModelsCheck(_) => commands::models_check(&run)?,
        Command::Probe(_) => commands::probe(&run)?,
        Command::Deterministic(_) => commands::deterministic(&run)?,
        Command::Validate(_) => commands::validate(&run)?,
    };
    let manifest = run.finish(outputs)?;
    println!("{}", serde_json::to_string(&manifest).map_err(CliError::from_json)?);
    Ok(())
}
