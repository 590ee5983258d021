mod bench;
mod config;
mod document;
mod report;
mod transfer;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CliError, Flags, RunConfig};
use document::{write_json, Document};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_UNSTABLE: u8 = 3;

#[derive(Parser)]
#[command(name = "twinverify")]
#[command(about = "Differential verification, policy transfer and throughput for twin RL environment backends")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the L1, L2 and L3 gates in order, stopping at the first failure
    Verify(Flags),
    /// Train or fix a policy on each twin and test return equivalence with TOST
    Transfer(Flags),
    /// Measure steps per second over batch sizes
    Bench {
        #[command(flatten)]
        flags: Flags,
        /// Also time env steps against synthetic policies of 2e6, 2e7 and 2e8 parameters
        #[arg(long)]
        breakdown: bool,
    },
    /// Merge JSON reports into one markdown summary
    Report {
        /// Reports written with --json by verify, transfer or bench
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Write the merged summary as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

/// Prints the text summary unless the JSON goes to stdout.
fn emit(config_json: Option<&PathBuf>, doc: &Document, text: String) -> Result<(), CliError> {
    if let Some(path) = config_json {
        write_json(doc, path)?;
    }
    if config_json.is_none_or(|p| p.as_os_str() != "-") {
        print!("{text}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Verify(flags) => {
            let config: RunConfig = flags.resolve()?;
            let out = verify::run(&config)?;
            verify::update_gate(&config, &out)?;
            let code = if out.status.passed() { 0 } else { EXIT_FAILED };
            let text = verify::render(&out);
            emit(config.json.as_ref(), &Document::Verify(out), text)?;
            Ok(code)
        }
        Command::Transfer(flags) => {
            let config = flags.resolve()?;
            let out = transfer::run(&config)?;
            let code = if out.status.passed() { 0 } else { EXIT_FAILED };
            let text = transfer::render(&out);
            emit(config.json.as_ref(), &Document::Transfer(out), text)?;
            Ok(code)
        }
        Command::Bench { flags, breakdown } => {
            let config = flags.resolve()?;
            let out = bench::run(&config, breakdown)?;
            let code = if out.timing.all_stable { 0 } else { EXIT_UNSTABLE };
            let text = bench::render(&out);
            emit(config.json.as_ref(), &Document::Bench(out), text)?;
            Ok(code)
        }
        Command::Report { paths, json } => {
            let (summary, warnings) = report::run(&paths)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            if let Some(path) = &json {
                write_json(&summary, path)?;
            }
            if json.as_ref().is_none_or(|p| p.as_os_str() != "-") {
                print!("{}", report::render(&summary));
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::Run(_) => EXIT_FAILED,
            })
        }
    }
}
