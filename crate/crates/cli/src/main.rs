#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

mod cli;
mod commands;
mod config;
mod error;
mod report;

use cli::{Cli, Command, Common, Format};
use commands::Outcome;
use error::{usage, CliError, CliResult};
use report::{sha256_hex, Provenance, Report, SCHEMA, SCHEMA_VERSION};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scanres: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (name, common, outcome) = match &cli.command {
        Command::FitS11(c) => ("fit-s11", c, commands::fit_s11(c)),
        Command::LossSweep { mode, common } => ("loss-sweep", common, commands::loss_sweep(*mode, common)),
        Command::Calibrate(c) => ("calibrate", c, commands::calibrate(c)),
        Command::Scan(c) => ("scan", c, commands::scan(c)),
        Command::Sensitivity(c) => ("sensitivity", c, commands::sensitivity(c)),
        Command::Transmon(c) => ("transmon", c, commands::transmon(c)),
        Command::Purcell(c) => ("purcell", c, commands::purcell(c)),
        Command::Coherence { kind, common } => ("coherence", common, commands::coherence(*kind, common)),
        Command::Synth { kind, common } => ("synth", common, commands::synth(*kind, common)),
        Command::Schema => {
            print!("{SCHEMA}");
            return Ok(());
        }
    };
    emit(name, common, outcome?)
}

fn emit(name: &str, common: &Common, outcome: Outcome) -> CliResult<()> {
    let input_refs: Vec<&[u8]> = outcome.input.iter().map(Vec::as_slice).collect();
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: name.to_owned(),
        tool_version: env!("CARGO_PKG_VERSION"),
        provenance: Provenance {
            input_sha256: (!input_refs.is_empty()).then(|| sha256_hex(&input_refs)),
            config_sha256: outcome.config.as_deref().map(|c| sha256_hex(&[c])),
            seed: outcome.seed,
        },
        warnings: outcome.warnings,
        result: outcome.result,
    };
    let (file, text) = match common.format {
        Format::Json => ("report.json", report.to_json()),
        Format::Csv => ("report.csv", report.to_csv()),
    };
    match &common.output {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
            for (artifact, bytes) in &outcome.artifacts {
                write(&dir.join(artifact), bytes)?;
            }
            write(&dir.join(file), text.as_bytes())
        }
        None => {
            if !outcome.artifacts.is_empty() {
                eprintln!("scanres: tabular outputs are only written with --output");
            }
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Usage(format!("cannot write report: {e}")))
        }
    }
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}
