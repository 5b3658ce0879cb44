//! `roughwave --config run.cfg --out results/ [--jobs N] [--seed S]`
//!
//! Without `--config` the experiment list is printed as JSON.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use roughwave::cli::{self, CliError, RunOptions};
use roughwave::output::json_bytes;

#[derive(Parser, Debug)]
#[command(name = "roughwave", version, about = "Batch runner for the roughwave experiments")]
struct Args {
    /// Flat `key = value` experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "roughwave-out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the `seed` key of the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let Some(config) = args.config else {
        let _ = std::io::stdout().write_all(&json_bytes(&cli::list_experiments()));
        return ExitCode::SUCCESS;
    };
    match cli::run(&RunOptions { config, out: args.out, jobs: args.jobs, seed: args.seed }) {
        Ok(record) => {
            let _ = std::io::stdout().write_all(&json_bytes(&record));
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    let _ = std::io::stderr().write_all(&json_bytes(&e.to_json()));
    ExitCode::from(e.exit_code() as u8)
}
