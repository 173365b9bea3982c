//! CSV and JSON formats for traces, sweeps, approach curves, time series,
//! device tables, coherence traces and gridded maps.
//!
//! Readers report malformed input as [`Error::Parse`] with the 1-based line
//! number. Floats are written in shortest round-trip form.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{CoherenceTrace, Experiment};
use crate::resonator::ComplexTrace;
use crate::sensitivity::{NoiseSpectrum, PhaseTimeSeries};
use crate::tip::{Material, MaterialMap, ScanChannel, ScanImage};

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => parse_err(line, format!("{kind:?}")),
    }
}

struct Table {
    header: Vec<String>,
    /// (line, fields)
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut records = rdr.records();
    let header = loop {
        match records.next() {
            None => return Err(parse_err(1, "empty file")),
            Some(rec) => {
                let rec = rec.map_err(csv_err)?;
                if rec.iter().all(str::is_empty) {
                    continue;
                }
                break rec.iter().map(|s| s.to_ascii_lowercase()).collect::<Vec<_>>();
            }
        }
    };
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        rows.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(Table { header, rows })
}

fn expect_header(table: &Table, expected: &[&str]) -> Result<()> {
    if table.header != expected {
        return Err(parse_err(
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), table.header.join(",")),
        ));
    }
    Ok(())
}

fn parse_f64(field: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| parse_err(line, format!("column {column}: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("column {column}: non-finite value")));
    }
    Ok(v)
}

fn numeric_rows(table: &Table) -> Result<Vec<(u64, Vec<f64>)>> {
    table
        .rows
        .iter()
        .map(|(line, fields)| {
            let vals = fields
                .iter()
                .zip(&table.header)
                .map(|(f, col)| parse_f64(f, *line, col))
                .collect::<Result<Vec<_>>>()?;
            Ok((*line, vals))
        })
        .collect()
}

fn require_rows(table: &Table) -> Result<()> {
    if table.rows.is_empty() {
        return Err(parse_err(2, "no data rows"));
    }
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn write_rows<W: Write>(writer: W, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `freq_hz,re,im`.
pub fn read_trace<R: Read>(reader: R) -> Result<ComplexTrace> {
    let table = read_table(reader)?;
    expect_header(&table, &["freq_hz", "re", "im"])?;
    require_rows(&table)?;
    let rows = numeric_rows(&table)?;
    if let Some(w) = rows.windows(2).find(|w| w[1].1[0] <= w[0].1[0]) {
        return Err(parse_err(w[1].0, "frequencies must be strictly increasing"));
    }
    let freqs = rows.iter().map(|r| r.1[0]).collect();
    let samples = rows.iter().map(|r| Complex64::new(r.1[1], r.1[2])).collect();
    ComplexTrace::new(freqs, samples)
}

pub fn write_trace<W: Write>(writer: W, trace: &ComplexTrace) -> Result<()> {
    write_rows(
        writer,
        &["freq_hz", "re", "im"],
        trace.freqs().iter().zip(trace.samples()).map(|(f, s)| vec![*f, s.re, s.im]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Column `p_dbm`.
    Power,
    /// Column `t_k`.
    Temperature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    /// (x, Qi) with x in dBm or K as given in the file.
    pub points: Vec<(f64, f64)>,
}

/// Columns `p_dbm,qi` or `t_k,qi`.
pub fn read_sweep<R: Read>(reader: R) -> Result<Sweep> {
    let table = read_table(reader)?;
    let axis = match table.header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["p_dbm", "qi"] => SweepAxis::Power,
        ["t_k", "qi"] => SweepAxis::Temperature,
        _ => {
            return Err(parse_err(
                1,
                format!("expected header `p_dbm,qi` or `t_k,qi`, found `{}`", table.header.join(",")),
            ))
        }
    };
    require_rows(&table)?;
    let rows = numeric_rows(&table)?;
    for (line, v) in &rows {
        if v[1] <= 0.0 {
            return Err(parse_err(*line, "qi must be > 0"));
        }
        if axis == SweepAxis::Temperature && v[0] <= 0.0 {
            return Err(parse_err(*line, "t_k must be > 0"));
        }
    }
    Ok(Sweep { axis, points: rows.into_iter().map(|(_, v)| (v[0], v[1])).collect() })
}

pub fn write_sweep<W: Write>(writer: W, sweep: &Sweep) -> Result<()> {
    let x = match sweep.axis {
        SweepAxis::Power => "p_dbm",
        SweepAxis::Temperature => "t_k",
    };
    write_rows(writer, &[x, "qi"], sweep.points.iter().map(|p| vec![p.0, p.1]))
}

/// Columns `z_m,delta_f0_hz`.
pub fn read_approach<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let table = read_table(reader)?;
    expect_header(&table, &["z_m", "delta_f0_hz"])?;
    require_rows(&table)?;
    Ok(numeric_rows(&table)?.into_iter().map(|(_, v)| (v[0], v[1])).collect())
}

pub fn write_approach<W: Write>(writer: W, points: &[(f64, f64)]) -> Result<()> {
    write_rows(writer, &["z_m", "delta_f0_hz"], points.iter().map(|p| vec![p.0, p.1]))
}

/// Columns `t_s,phase_rad` on a uniform time grid.
pub fn read_timeseries_csv<R: Read>(reader: R) -> Result<PhaseTimeSeries> {
    let table = read_table(reader)?;
    expect_header(&table, &["t_s", "phase_rad"])?;
    require_rows(&table)?;
    let rows = numeric_rows(&table)?;
    if rows.len() < 2 {
        return Err(parse_err(rows[0].0, "need at least two samples"));
    }
    let dt = (rows[rows.len() - 1].1[0] - rows[0].1[0]) / (rows.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(parse_err(rows[1].0, "time must increase"));
    }
    for (k, (line, v)) in rows.iter().enumerate() {
        let expected = rows[0].1[0] + k as f64 * dt;
        if (v[0] - expected).abs() > 1e-6 * dt {
            return Err(parse_err(*line, "time grid is not uniform"));
        }
    }
    PhaseTimeSeries::new(1.0 / dt, rows.into_iter().map(|(_, v)| v[1]).collect())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSeriesJson {
    sample_rate: f64,
    samples: Vec<f64>,
}

/// `{"sample_rate": Hz, "samples": [rad, ...]}`
pub fn read_timeseries_json<R: Read>(reader: R) -> Result<PhaseTimeSeries> {
    let doc: TimeSeriesJson = serde_json::from_reader(reader)?;
    PhaseTimeSeries::new(doc.sample_rate, doc.samples)
}

pub fn write_timeseries<W: Write>(writer: W, series: &PhaseTimeSeries) -> Result<()> {
    let dt = 1.0 / series.sample_rate();
    write_rows(writer, &["t_s", "phase_rad"], series.samples().iter().enumerate().map(|(k, p)| vec![k as f64 * dt, *p]))
}

/// Columns `freq_hz,asd`.
pub fn write_spectrum<W: Write>(writer: W, spectrum: &NoiseSpectrum) -> Result<()> {
    write_rows(writer, &["freq_hz", "asd"], spectrum.freqs.iter().zip(&spectrum.asd).map(|(f, a)| vec![*f, *a]))
}

/// One row of the device table; geometry columns are carried as metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRow {
    pub device: String,
    pub w_um: f64,
    pub l_um: f64,
    pub s_um: f64,
    pub ec_ghz: f64,
    pub ej_ghz: f64,
    pub t2r_us: f64,
}

const DEVICE_HEADER: [&str; 7] = ["device", "w_um", "l_um", "s_um", "ec_ghz", "ej_ghz", "t2r_us"];

pub fn read_devices<R: Read>(reader: R) -> Result<Vec<DeviceRow>> {
    let table = read_table(reader)?;
    expect_header(&table, &DEVICE_HEADER)?;
    require_rows(&table)?;
    table
        .rows
        .iter()
        .map(|(line, f)| {
            let num = |i: usize| parse_f64(&f[i], *line, DEVICE_HEADER[i]);
            Ok(DeviceRow {
                device: f[0].clone(),
                w_um: num(1)?,
                l_um: num(2)?,
                s_um: num(3)?,
                ec_ghz: num(4)?,
                ej_ghz: num(5)?,
                t2r_us: num(6)?,
            })
        })
        .collect()
}

/// Columns `delay_s,signal`.
pub fn read_coherence<R: Read>(reader: R, kind: Experiment) -> Result<CoherenceTrace> {
    let table = read_table(reader)?;
    expect_header(&table, &["delay_s", "signal"])?;
    require_rows(&table)?;
    let rows = numeric_rows(&table)?;
    if let Some(w) = rows.windows(2).find(|w| w[1].1[0] <= w[0].1[0]) {
        return Err(parse_err(w[1].0, "delays must be strictly increasing"));
    }
    CoherenceTrace::new(kind, rows.iter().map(|r| r.1[0]).collect(), rows.iter().map(|r| r.1[1]).collect())
}

pub fn write_coherence<W: Write>(writer: W, trace: &CoherenceTrace) -> Result<()> {
    write_rows(writer, &["delay_s", "signal"], trace.delays.iter().zip(&trace.signal).map(|(d, s)| vec![*d, *s]))
}

/// Placement and meaning of a headerless CSV grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSidecar {
    pub pitch_m: f64,
    pub origin_m: [f64; 2],
    /// `material` for sample maps, otherwise the scan channel.
    pub channel: String,
}

fn read_grid<R: Read>(reader: R) -> Result<Vec<(u64, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<(u64, Vec<String>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if let Some((_, first)) = rows.first() {
            if rec.len() != first.len() {
                return Err(parse_err(line, format!("expected {} cells, found {}", first.len(), rec.len())));
            }
        }
        rows.push((line, rec.iter().map(str::to_owned).collect()));
    }
    if rows.is_empty() {
        return Err(parse_err(1, "empty grid"));
    }
    Ok(rows)
}

/// Cells are `metal` or a dielectric relative permittivity.
pub fn read_map<R: Read>(reader: R, sidecar: &GridSidecar) -> Result<MaterialMap> {
    if sidecar.channel != "material" {
        return Err(Error::invalid("sidecar", format!("channel `{}` is not a material map", sidecar.channel)));
    }
    let rows = read_grid(reader)?;
    let cols = rows[0].1.len();
    let mut cells = Vec::with_capacity(rows.len() * cols);
    for (line, fields) in &rows {
        for f in fields {
            let cell = if f.eq_ignore_ascii_case("metal") {
                Material::Metal
            } else {
                let eps = parse_f64(f, *line, "permittivity")?;
                if eps < 1.0 {
                    return Err(parse_err(*line, format!("permittivity {eps} below 1")));
                }
                Material::Dielectric(eps)
            };
            cells.push(cell);
        }
    }
    MaterialMap::new(rows.len(), cols, cells, sidecar.pitch_m, (sidecar.origin_m[0], sidecar.origin_m[1]))
}

pub fn write_map<W: Write>(writer: W, map: &MaterialMap) -> Result<GridSidecar> {
    let mut w = csv::Writer::from_writer(writer);
    for r in 0..map.rows {
        w.write_record((0..map.cols).map(|c| match map.get(r, c) {
            Material::Metal => "metal".to_owned(),
            Material::Dielectric(eps) => fmt(eps),
        }))
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(GridSidecar { pitch_m: map.pitch, origin_m: [map.origin.0, map.origin.1], channel: "material".into() })
}

pub fn channel_name(channel: ScanChannel) -> &'static str {
    match channel {
        ScanChannel::Phase => "phase_rad",
        ScanChannel::Frequency => "delta_f0_hz",
    }
}

pub fn read_image<R: Read>(reader: R, sidecar: &GridSidecar) -> Result<ScanImage> {
    let channel = match sidecar.channel.as_str() {
        "phase_rad" => ScanChannel::Phase,
        "delta_f0_hz" => ScanChannel::Frequency,
        other => return Err(Error::invalid("sidecar", format!("unknown image channel `{other}`"))),
    };
    let rows = read_grid(reader)?;
    let cols = rows[0].1.len();
    let mut values = Vec::with_capacity(rows.len() * cols);
    for (line, fields) in &rows {
        for f in fields {
            values.push(parse_f64(f, *line, "value")?);
        }
    }
    Ok(ScanImage {
        rows: rows.len(),
        cols,
        values,
        pitch: sidecar.pitch_m,
        origin: (sidecar.origin_m[0], sidecar.origin_m[1]),
        channel,
    })
}

pub fn write_image<W: Write>(writer: W, image: &ScanImage) -> Result<GridSidecar> {
    let mut w = csv::Writer::from_writer(writer);
    for r in 0..image.rows {
        w.write_record(image.row(r).iter().map(|v| fmt(*v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(GridSidecar {
        pitch_m: image.pitch,
        origin_m: [image.origin.0, image.origin.1],
        channel: channel_name(image.channel).into(),
    })
}

pub fn read_sidecar<R: Read>(reader: R) -> Result<GridSidecar> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn write_sidecar<W: Write>(writer: W, sidecar: &GridSidecar) -> Result<()> {
    serde_json::to_writer_pretty(writer, sidecar)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resonator::{synthesize_trace, NoiseSpec, ResonatorParams};

    fn parse_line(err: Error) -> u64 {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn trace_round_trip_is_exact() {
        let p = ResonatorParams::ideal(7.955e9, 11900.0, 12000.0, -0.16);
        let freqs: Vec<f64> = (0..50).map(|k| 7.95e9 + k as f64 * 2e5).collect();
        let tr = synthesize_trace(&p, &freqs, &NoiseSpec::noiseless()).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &tr).unwrap();
        assert_eq!(read_trace(buf.as_slice()).unwrap(), tr);
    }

    #[test]
    fn malformed_trace_reports_line() {
        let text = "freq_hz,re,im\n1,0.1,0.2\n2,abc,0.2\n";
        assert_eq!(parse_line(read_trace(text.as_bytes()).unwrap_err()), 3);
        let text = "freq_hz,re,im\n1,0.1,0.2\n2,0.1\n";
        assert_eq!(parse_line(read_trace(text.as_bytes()).unwrap_err()), 3);
        assert_eq!(parse_line(read_trace("".as_bytes()).unwrap_err()), 1);
        assert_eq!(parse_line(read_trace("f,re,im\n1,2,3\n".as_bytes()).unwrap_err()), 1);
    }

    #[test]
    fn sweep_axis_from_header() {
        let s = read_sweep("p_dbm,qi\n-140,1e4\n-130,1.1e4\n".as_bytes()).unwrap();
        assert_eq!(s.axis, SweepAxis::Power);
        let s = read_sweep("T_K,Qi\n0.1,1e4\n".as_bytes()).unwrap();
        assert_eq!(s.axis, SweepAxis::Temperature);
        assert_eq!(parse_line(read_sweep("t_k,qi\n0.1,-5\n".as_bytes()).unwrap_err()), 2);
    }

    #[test]
    fn timeseries_requires_uniform_grid() {
        let mut text = String::from("t_s,phase_rad\n");
        for k in 0..100 {
            text.push_str(&format!("{},{}\n", k as f64 * 1e-3, (k as f64).sin() * 1e-3));
        }
        let s = read_timeseries_csv(text.as_bytes()).unwrap();
        assert!((s.sample_rate() - 1000.0).abs() < 1e-6);
        let bad = text.replacen("0.002,", "0.0025,", 1);
        assert_eq!(parse_line(read_timeseries_csv(bad.as_bytes()).unwrap_err()), 4);
    }

    #[test]
    fn timeseries_json() {
        let samples: Vec<f64> = (0..64).map(|k| k as f64).collect();
        let doc = serde_json::json!({"sample_rate": 500.0, "samples": samples});
        let s = read_timeseries_json(doc.to_string().as_bytes()).unwrap();
        assert_eq!(s.sample_rate(), 500.0);
        assert!(read_timeseries_json("{\"sample_rate\": 1, \"samples\": [], \"x\": 1}".as_bytes()).is_err());
    }

    #[test]
    fn devices_parse() {
        let text = "device,w_um,l_um,s_um,ec_ghz,ej_ghz,t2r_us\nX0,20,94,10,0.27,22,1.8\n";
        let rows = read_devices(text.as_bytes()).unwrap();
        assert_eq!(rows[0].device, "X0");
        assert_eq!(rows[0].ej_ghz, 22.0);
    }

    #[test]
    fn map_and_image_round_trip() {
        let map = MaterialMap::square_hole(12, 1e-6, 4.0, Material::Metal).unwrap();
        let mut buf = Vec::new();
        let side = write_map(&mut buf, &map).unwrap();
        let mut side_buf = Vec::new();
        write_sidecar(&mut side_buf, &side).unwrap();
        let side = read_sidecar(side_buf.as_slice()).unwrap();
        assert_eq!(read_map(buf.as_slice(), &side).unwrap(), map);

        let img = ScanImage {
            rows: 2,
            cols: 3,
            values: vec![0.0, 1.5, -2e-9, 3.25, 1e300, 0.1],
            pitch: 2e-7,
            origin: (1e-6, -1e-6),
            channel: ScanChannel::Frequency,
        };
        let mut buf = Vec::new();
        let side = write_image(&mut buf, &img).unwrap();
        assert_eq!(read_image(buf.as_slice(), &side).unwrap(), img);
        assert_eq!(
            parse_line(
                read_map(
                    "metal,1\nmetal\n".as_bytes(),
                    &GridSidecar { pitch_m: 1e-6, origin_m: [0.0, 0.0], channel: "material".into() }
                )
                .unwrap_err()
            ),
            2
        );
    }

    #[test]
    fn coherence_round_trip() {
        let tr = CoherenceTrace::new(Experiment::Echo, vec![0.0, 1e-7, 2e-7], vec![1.0, 0.9, 0.8]).unwrap();
        let mut buf = Vec::new();
        write_coherence(&mut buf, &tr).unwrap();
        assert_eq!(read_coherence(buf.as_slice(), Experiment::Echo).unwrap(), tr);
    }
}
