use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use plankton_lk::acceptance;
use plankton_lk::app::{self, EXIT_INPUT, EXIT_OK};

#[derive(Parser)]
#[command(name = "plankton-lk", version, about = "Stability certificates and delay simulation for a plankton-fish model")]
struct Cli {
    /// Output directory; overrides `output.dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run the built-in acceptance suite and exit.
    #[arg(long)]
    seed_check: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify, certify, simulate and verify one scenario.
    Run { config: PathBuf },
    /// Re-run a scenario once per value of a dotted config key.
    Sweep {
        config: PathBuf,
        /// Dotted key such as `params.d1`.
        #[arg(long)]
        key: String,
        /// Comma-separated values; may be empty.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<String>,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c.clamp(0, 255) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if cli.seed_check {
        let results = acceptance::run_all();
        for r in &results {
            println!("{}", r.line());
        }
        return if results.iter().all(|r| r.acceptable()) { ExitCode::SUCCESS } else { ExitCode::FAILURE };
    }

    match cli.command {
        None => {
            eprintln!("plankton-lk: no command given (try `plankton-lk --help`)");
            code(EXIT_INPUT)
        }
        Some(Command::Run { config }) => match app::run_scenario(&config, cli.out.as_deref()) {
            Ok(summary) => {
                for reason in &summary.reasons {
                    eprintln!("{reason}");
                }
                println!("exit {} -> {}", summary.exit_code, summary.out_dir.display());
                code(summary.exit_code)
            }
            Err(e) => {
                eprintln!("plankton-lk: {e}");
                code(EXIT_INPUT)
            }
        },
        Some(Command::Sweep { config, key, values }) => {
            let values: Vec<String> = values.into_iter().filter(|v| !v.trim().is_empty()).collect();
            let out = cli.out.unwrap_or_else(|| PathBuf::from("sweep_out"));
            match app::sweep(&config, &key, &values, &out) {
                Ok(rows) => {
                    println!("{} rows -> {}", rows.len(), out.join("sweep.csv").display());
                    code(EXIT_OK)
                }
                Err(e) => {
                    eprintln!("plankton-lk: {e}");
                    code(EXIT_INPUT)
                }
            }
        }
    }
}
