use serde::Serialize;

use scanres_core::io;
use scanres_core::tip::{
    approach_shift, calibrate_distance, simulate_scan, steepest_edge_resolution, ScanChannel, ScanSettings,
};

use super::{
    estimated, in_file, input_path, json_bytes, read_file, read_input, require_seed, to_value, Estimated, Outcome,
};
use crate::cli::Common;
use crate::config::{self, CalibrateConfig, ChannelName, ScanConfig};
use crate::error::{data, CliResult};

#[derive(Serialize)]
struct CalibrationReport {
    points: usize,
    d0_m: Estimated,
    alpha_cal_f_per_hz: Estimated,
    residual_rms_f: f64,
    iterations: usize,
    converged: bool,
    /// (z_m, measured delta_f0_hz, model delta_f0_hz)
    fit: Vec<(f64, f64, f64)>,
}

pub fn calibrate(common: &Common) -> CliResult<Outcome> {
    let (cfg, config_bytes) = config::load::<CalibrateConfig>(common.config.as_deref())?;
    let (path, bytes) = read_input(common)?;
    let approach = io::read_approach(bytes.as_slice()).map_err(in_file(&path))?;
    let tip = cfg.tip.model();
    let cal = calibrate_distance(&approach, &tip).map_err(in_file(&path))?;
    let fit = approach
        .iter()
        .map(|&(z, df)| Ok((z, df, approach_shift(z, cal.d0, cal.alpha_cal, &tip)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let mut warnings = Vec::new();
    if !cal.converged {
        warnings.push("calibration fit did not converge".into());
    }
    let report = CalibrationReport {
        points: approach.len(),
        d0_m: estimated(cal.d0, cal.d0_stderr),
        alpha_cal_f_per_hz: estimated(cal.alpha_cal, cal.alpha_cal_stderr),
        residual_rms_f: cal.residual_rms,
        iterations: cal.iterations,
        converged: cal.converged,
        fit,
    };
    Ok(Outcome { result: to_value(&report), warnings, input: vec![bytes], config: config_bytes, ..Outcome::default() })
}

#[derive(Serialize)]
struct ScanReport {
    rows: usize,
    cols: usize,
    pitch_m: f64,
    channel: &'static str,
    kernel_fwhm_m: f64,
    /// 10-90% width of the steepest edge along the centre row.
    edge_resolution_m: Option<f64>,
    min: f64,
    max: f64,
    corner_value: f64,
}

pub fn scan(common: &Common) -> CliResult<Outcome> {
    let (cfg, config_bytes) = config::load::<ScanConfig>(common.config.as_deref())?;
    let map_path = input_path(common)?.to_owned();
    let sidecar_path = map_path.with_extension("json");
    let map_bytes = read_file(&map_path)?;
    let sidecar_bytes = read_file(&sidecar_path)?;
    let sidecar = io::read_sidecar(sidecar_bytes.as_slice()).map_err(in_file(&sidecar_path))?;
    let map = io::read_map(map_bytes.as_slice(), &sidecar).map_err(in_file(&map_path))?;

    let noise = cfg.noise_rms_af * 1e-18;
    let seed =
        if noise > 0.0 { Some(require_seed(common, cfg.seed, "scan noise")?) } else { super::seed(common, cfg.seed) };
    let channel = match cfg.channel {
        ChannelName::Phase => ScanChannel::Phase,
        ChannelName::Frequency => ScanChannel::Frequency,
    };
    let tip = cfg.tip.model();
    let settings = ScanSettings { height: cfg.height_um * 1e-6, noise_rms: noise, seed: seed.unwrap_or(0), channel };
    let image = simulate_scan(&map, &tip, &cfg.resonator.params(), &cfg.calibration.result(), &settings)?;

    let mut warnings = Vec::new();
    let edge = match steepest_edge_resolution(image.row(image.rows / 2), image.pitch) {
        Ok(w) => Some(w),
        Err(e) => {
            warnings.push(format!("no edge resolved on the centre row: {e}"));
            None
        }
    };
    let (min, max) = image.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
    if !(min.is_finite() && max.is_finite()) {
        return Err(data("scan produced non-finite values"));
    }
    let report = ScanReport {
        rows: image.rows,
        cols: image.cols,
        pitch_m: image.pitch,
        channel: io::channel_name(channel),
        kernel_fwhm_m: tip.kernel_width(settings.height),
        edge_resolution_m: edge,
        min,
        max,
        corner_value: image.get(0, 0),
    };
    let mut grid = Vec::new();
    let side = io::write_image(&mut grid, &image)?;
    Ok(Outcome {
        result: to_value(&report),
        artifacts: vec![("image.csv".into(), grid), ("image.json".into(), json_bytes(&side))],
        seed,
        warnings,
        input: vec![map_bytes, sidecar_bytes],
        config: config_bytes,
    })
}
