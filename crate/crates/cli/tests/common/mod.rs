#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scanres"))
}

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn run_path(args: &[&str], paths: &[(&str, &Path)]) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    for (flag, p) in paths {
        cmd.arg(flag).arg(p);
    }
    cmd.output().expect("binary runs")
}

pub fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

/// Subcommand arguments paired with the flag/path inputs it reads.
pub type Invocation = (Vec<&'static str>, Vec<(&'static str, PathBuf)>);

/// Every subcommand with its fixture inputs.
pub fn invocations() -> Vec<Invocation> {
    vec![
        (vec!["fit-s11"], vec![("--input", fixture("trace/trace.csv"))]),
        (
            vec!["loss-sweep", "--mode", "power"],
            vec![("--input", fixture("power_sweep/power_sweep.csv")), ("--config", fixture("power_sweep/loss.toml"))],
        ),
        (
            vec!["loss-sweep", "--mode", "temperature"],
            vec![
                ("--input", fixture("temperature_sweep/temperature_sweep.csv")),
                ("--config", fixture("temperature_sweep/loss.toml")),
            ],
        ),
        (
            vec!["calibrate"],
            vec![("--input", fixture("approach/approach.csv")), ("--config", fixture("approach/calibrate.toml"))],
        ),
        (vec!["scan"], vec![("--input", fixture("map/map.csv")), ("--config", fixture("map/scan.toml"))]),
        (
            vec!["sensitivity"],
            vec![
                ("--input", fixture("timeseries/timeseries.csv")),
                ("--config", fixture("timeseries/sensitivity.toml")),
            ],
        ),
        (vec!["transmon"], vec![("--config", fixture("transmon.toml"))]),
        (vec!["transmon"], vec![("--input", fixture("devices.csv"))]),
        (vec!["purcell"], vec![("--config", fixture("purcell.toml"))]),
        (vec!["coherence", "--kind", "t1"], vec![("--input", fixture("coherence_t1/coherence.csv"))]),
        (vec!["coherence", "--kind", "ramsey"], vec![("--input", fixture("coherence_ramsey/coherence.csv"))]),
        (vec!["coherence", "--kind", "echo"], vec![("--input", fixture("coherence_echo/coherence.csv"))]),
    ]
}

pub fn invoke(args: &[&str], paths: &[(&str, PathBuf)], output: Option<&Path>) -> Output {
    let mut all: Vec<(&str, &Path)> = paths.iter().map(|(f, p)| (*f, p.as_path())).collect();
    if let Some(o) = output {
        all.push(("--output", o));
    }
    run_path(args, &all)
}

pub fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}
