//! `fogstream` binary: key generation, encrypt/decrypt pipelines, known-
//! answer vectors, adversarial scenarios, and benchmarks.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use fogstream_cli::commands;
use fogstream_cli::CliError;
use fogstream_core::hashcore::DEFAULT_HASH;

#[derive(Parser)]
#[command(
    name = "fogstream",
    version,
    about = "Hash-keystream encryption for IoT-to-fog links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a pre-shared key pair as two state files.
    Keygen {
        /// Output prefix; writes `<prefix>-device.state` and `<prefix>-fog.state`.
        #[arg(long)]
        out: PathBuf,
        /// Deterministic seed (testing); omit for an OS-entropy key.
        #[arg(long)]
        seed: Option<u64>,
        /// Overwrite existing state files.
        #[arg(long)]
        force: bool,
    },
    /// Encrypt stdin or a file into wire tuples, advancing the state file.
    Send {
        #[arg(long)]
        state: PathBuf,
        /// Payload source; stdin when omitted.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Emit one hex line per tuple instead of raw bytes.
        #[arg(long)]
        hex: bool,
    },
    /// Decrypt wire tuples from stdin or a file, advancing the state file.
    Recv {
        #[arg(long)]
        state: PathBuf,
        /// Wire source; stdin when omitted.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Override the resync window from the state file.
        #[arg(long)]
        window: Option<u32>,
    },
    /// Emit known-answer keystream vectors (zero key, counters 1..=count).
    Vectors {
        #[arg(long, default_value = DEFAULT_HASH)]
        hash: String,
        #[arg(long)]
        count: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time encryption schemes and report us/byte figures.
    Bench {
        /// Comma-separated subset of: proposed, proposed-precomputed, aes256-ctr.
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<String>,
        /// Blocks per timed pass.
        #[arg(long, default_value_t = 100_000)]
        blocks: usize,
        /// Write machine-readable rows to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run an adversarial channel scenario file and report the outcome.
    Scenario {
        #[arg(long)]
        file: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn read_source(input: Option<&PathBuf>) -> Result<Vec<u8>, CliError> {
    match input {
        Some(path) => Ok(std::fs::read(path)?),
        None => {
            let mut buf = Vec::new();
            std::io::stdin().lock().read_to_end(&mut buf)?;
            Ok(buf)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    match cli.command {
        Command::Keygen { out, seed, force } => {
            commands::cmd_keygen(&out, seed, force, &mut stdout.lock())
        }
        Command::Send { state, input, hex } => {
            let payload = read_source(input.as_ref())?;
            let mut out = stdout.lock();
            commands::cmd_send(&state, &payload, hex, &mut out)?;
            out.flush()?;
            Ok(())
        }
        Command::Recv {
            state,
            input,
            window,
        } => {
            let wire = read_source(input.as_ref())?;
            let mut out = stdout.lock();
            let result = commands::cmd_recv(&state, &wire, window, &mut out, &mut stderr.lock());
            out.flush()?;
            result
        }
        Command::Vectors { hash, count, out } => match out {
            Some(path) => {
                let mut buf = Vec::new();
                commands::cmd_vectors(&hash, count, &mut buf)?;
                std::fs::write(path, buf)?;
                Ok(())
            }
            None => commands::cmd_vectors(&hash, count, &mut stdout.lock()),
        },
        Command::Bench {
            schemes,
            blocks,
            csv,
        } => commands::cmd_bench(&schemes, blocks, csv.as_deref(), &mut stdout.lock()),
        Command::Scenario { file, report } => {
            commands::cmd_scenario(&file, report.as_deref(), &mut stdout.lock())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
