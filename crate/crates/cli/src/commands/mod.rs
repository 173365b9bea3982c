use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::cli::Common;
use crate::error::{data, usage, CliError, CliResult};

mod fit;
mod loss;
mod qubit;
mod sensitivity;
mod synth;
mod tip;

pub use fit::fit_s11;
pub use loss::loss_sweep;
pub use qubit::{coherence, purcell, transmon};
pub use sensitivity::sensitivity;
pub use synth::synth;
pub use tip::{calibrate, scan};

/// Everything a subcommand hands back for the report and the output directory.
#[derive(Debug, Default)]
pub struct Outcome {
    pub result: Value,
    /// (file name, contents) written next to the report.
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub seed: Option<u64>,
    pub warnings: Vec<String>,
    pub input: Vec<Vec<u8>>,
    pub config: Option<Vec<u8>>,
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

pub fn input_path(common: &Common) -> CliResult<&Path> {
    common.input.as_deref().ok_or_else(|| usage("--input is required"))
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))
}

pub fn read_input(common: &Common) -> CliResult<(PathBuf, Vec<u8>)> {
    let path = input_path(common)?;
    Ok((path.to_owned(), read_file(path)?))
}

/// Prefixes a core error with the file it came from.
pub fn in_file(path: &Path) -> impl Fn(scanres_core::Error) -> CliError + '_ {
    move |e| data(format!("{}: {e}", path.display()))
}

/// `--seed` wins over the configuration.
pub fn seed(common: &Common, config: Option<u64>) -> Option<u64> {
    common.seed.or(config)
}

pub fn require_seed(common: &Common, config: Option<u64>, what: &str) -> CliResult<u64> {
    seed(common, config).ok_or_else(|| usage(format!("{what} is stochastic: set `seed` in the config or pass --seed")))
}

pub fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> scanres_core::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

pub fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializes");
    s.push(b'\n');
    s
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimated {
    pub value: f64,
    pub stderr: f64,
}

impl From<scanres_core::Estimate> for Estimated {
    fn from(e: scanres_core::Estimate) -> Self {
        Estimated { value: e.value, stderr: e.stderr }
    }
}

pub fn estimated(value: f64, stderr: f64) -> Estimated {
    Estimated { value, stderr }
}
