//! `oef-bench`: seed sweeps, rate fits and bound tables for the oef-core
//! solvers.
//!
//! Exit codes: 0 when every enabled certificate passed on every seed, 1 on a
//! certificate failure or solver error, 2 on an unusable config or input.

mod bounds;
mod config;
mod rates;
mod run;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{parse_seeds, Experiment, Overrides};
use run::Outcome;

#[derive(Parser)]
#[command(name = "oef-bench", version, about = "Benchmark harness for objective-evaluation-free Newton-type solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seed sweep and write traces, summary.json and bounds.csv.
    Run {
        config: PathBuf,
        /// Comma list (`0,3,7`) or range (`0..10`); replaces the config seeds.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long, value_enum)]
        certificates: Option<Toggle>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Fit local convergence orders for every trace CSV in a directory.
    Rates { dir: PathBuf },
    /// Print the theoretical bound table for a config.
    Bounds { config: PathBuf },
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

fn invalid(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seeds,
            certificates,
            max_iter,
        } => {
            let seeds = match seeds.as_deref().map(parse_seeds).transpose() {
                Ok(s) => s,
                Err(e) => return invalid(format!("{e:#}")),
            };
            let overrides = Overrides {
                seeds,
                certificates: certificates.map(|t| matches!(t, Toggle::On)),
                max_iter,
            };
            let exp = match Experiment::load(&config, &overrides) {
                Ok(e) => e,
                Err(e) => return invalid(format!("{e:#}")),
            };
            match run::run(&exp) {
                Ok((summary, outcome)) => {
                    println!(
                        "{}: {} seeds, all passed: {}, output {}",
                        summary.name,
                        summary.runs.len(),
                        summary.all_passed,
                        exp.output_dir.display()
                    );
                    match outcome {
                        Outcome::Passed => ExitCode::SUCCESS,
                        Outcome::Failed(lines) => {
                            for l in lines {
                                eprintln!("{l}");
                            }
                            ExitCode::from(1)
                        }
                        Outcome::Invalid(msg) => invalid(msg),
                    }
                }
                Err(e) => invalid(format!("{e:#}")),
            }
        }
        Command::Rates { dir } => match rates::rates(&dir) {
            Ok(t) => {
                print!("{}", rates::render(&t));
                ExitCode::SUCCESS
            }
            Err(e) => invalid(format!("{e:#}")),
        },
        Command::Bounds { config } => {
            let table = Experiment::load_for_bounds(&config)
                .and_then(|exp| bounds::bounds(&exp))
                .and_then(|rows| bounds::render(&rows));
            match table {
                Ok(s) => {
                    print!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => invalid(format!("{e:#}")),
            }
        }
    }
}
