use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sfatlab::experiment::{load_config, run, Kind, RunError};

/// Run one experiment from a JSON configuration.
#[derive(Parser, Debug)]
#[command(name = "sfatlab", version, about)]
struct Cli {
    /// Experiment kind.
    #[arg(value_enum)]
    kind: Kind,
    /// Path to the JSON configuration.
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to the config's `out`, then `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sfatlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let config = load_config(&cli.config)?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let base = cli
        .config
        .parent()
        .map(PathBuf::from)
        .unwrap_or_default();
    let output = run(cli.kind, config, cli.seed, &base)?;
    output.write(&out_dir)?;
    print!("{}", output.summary_text());
    Ok(())
}
