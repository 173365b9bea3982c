use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "scanres", version, about = "Scanning superconducting-resonator microscope toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Input data file.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Directory for the report and any tabular outputs; the report goes to stdout when absent.
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Random seed, overriding the configuration.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Report encoding.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    Power,
    Temperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    T1,
    Ramsey,
    Echo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Trace,
    PowerSweep,
    TemperatureSweep,
    Approach,
    Timeseries,
    Map,
    Coherence,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the reflection model to a complex S11 trace (freq_hz,re,im).
    FitS11(Common),
    /// Fit TLS and quasiparticle loss to a Qi sweep (p_dbm,qi or t_k,qi).
    LossSweep {
        #[arg(long, value_enum)]
        mode: SweepMode,
        #[command(flatten)]
        common: Common,
    },
    /// Extract the closest-approach gap and capacitance calibration from an approach curve (z_m,delta_f0_hz).
    Calibrate(Common),
    /// Simulate a constant-height scan over a material map (CSV grid plus JSON sidecar).
    Scan(Common),
    /// Convert a phase time series (t_s,phase_rad or JSON) into capacitance noise.
    Sensitivity(Common),
    /// Transmon transitions from EC/EJ, EC/EJ from measured lines, or a device table.
    Transmon(Common),
    /// Qubit relaxation against tip-sample distance.
    Purcell(Common),
    /// Fit a T1, Ramsey or echo decay (delay_s,signal).
    Coherence {
        #[arg(long, value_enum)]
        kind: ExperimentKind,
        #[command(flatten)]
        common: Common,
    },
    /// Generate synthetic input data.
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
        #[command(flatten)]
        common: Common,
    },
    /// Print the JSON schema of the report.
    Schema,
}
