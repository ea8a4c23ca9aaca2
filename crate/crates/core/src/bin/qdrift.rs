// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qdrift::scenario::{self, Overrides, Scenario};
use qdrift::{Error, UnravelingKind};

#[derive(Parser)]
#[command(name = "qdrift", version, about = "Quantum-drift simulations of local dephasing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, a run manifest, or a bundled preset by name.
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_parser = parse_unraveling)]
        unraveling: Option<UnravelingKind>,
        /// Output directory (default: out/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bundled presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Print an oracle-only table as CSV.
    Oracle { kind: String },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
}

fn parse_unraveling(s: &str) -> Result<UnravelingKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load(spec: &str) -> qdrift::Result<Scenario> {
    let path = PathBuf::from(spec);
    if path.exists() {
        Scenario::load(&path)
    } else if scenario::PRESETS.iter().any(|(n, _)| *n == spec) {
        Scenario::preset(spec)
    } else {
        Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{spec}: no such file or preset"),
        )))
    }
}

fn real_main(cli: Cli) -> qdrift::Result<()> {
    match cli.command {
        Command::Run {
            scenario: spec,
            seed,
            workers,
            unraveling,
            out,
        } => {
            let mut s = load(&spec)?;
            s.apply(Overrides {
                seed,
                workers,
                unraveling,
            });
            s.validate()?;
            let name = if s.name.is_empty() { "run".to_string() } else { s.name.clone() };
            let out = out.unwrap_or_else(|| PathBuf::from("out").join(name));
            let report = scenario::run_scenario(&s, &out)?;
            for f in &report.files {
                println!("{}", f.display());
            }
            eprintln!("[qdrift] done in {:.1} s", report.elapsed_seconds);
        }
        Command::Presets {
            action: PresetAction::List,
        } => {
            for (name, _) in scenario::PRESETS {
                let s = Scenario::preset(name)?;
                println!("{name:<16} {}", s.description);
            }
        }
        Command::Oracle { kind } => {
            print!("{}", scenario::oracle_table(&kind)?.to_csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qdrift: [{}] {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::InvalidParameter(_) | Error::Geometry(_) => 3,
        Error::Io(_) => 4,
        Error::Fit { .. } => 5,
        Error::Partial { .. } => 6,
        Error::Internal(_) => 70,
    }
}
