use serde::Serialize;

use scanres_core::io;
use scanres_core::sensitivity::{sensitivity_vs_bandwidth, WelchConfig};

use super::{csv_bytes, in_file, read_input, to_value, Outcome};
use crate::cli::Common;
use crate::config::{self, SensitivityConfig};
use crate::error::CliResult;

#[derive(Serialize)]
struct Band {
    bandwidth_hz: f64,
    capacitance_rms_f: f64,
}

#[derive(Serialize)]
struct SensitivityReport {
    sample_rate_hz: f64,
    samples: usize,
    frequency_resolution_hz: f64,
    slope_rad_per_hz: f64,
    alpha_cal_f_per_hz: f64,
    phase_variance_rad2: f64,
    /// Integrated phase PSD over the full band divided by the sample variance.
    parseval_ratio: f64,
    /// Mean phase ASD between 5% and 45% of the sample rate.
    phase_floor_rad_per_rthz: f64,
    /// Capacitance noise in a 1 Hz bandwidth.
    capacitance_1hz_f: f64,
    /// alpha_cal·σφ·√(2/fs)/|slope|, exact for white phase noise.
    white_noise_prediction_f_per_rthz: f64,
    bands: Vec<Band>,
}

pub fn sensitivity(common: &Common) -> CliResult<Outcome> {
    let (cfg, config_bytes) = config::load::<SensitivityConfig>(common.config.as_deref())?;
    let (path, bytes) = read_input(common)?;
    let series = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        io::read_timeseries_json(bytes.as_slice())
    } else {
        io::read_timeseries_csv(bytes.as_slice())
    }
    .map_err(in_file(&path))?;
    let welch = WelchConfig { segment_len: cfg.segment_len, overlap: cfg.overlap };
    let alpha = cfg.alpha_cal_ff_per_hz * 1e-15;
    let fs = series.sample_rate();
    let mut bands = cfg.bands_hz.clone();
    bands.insert(0, 1.0);
    let rep =
        sensitivity_vs_bandwidth(&series, &cfg.resonator.params(), alpha, &bands, &welch).map_err(in_file(&path))?;
    let variance = series.variance();
    let report = SensitivityReport {
        sample_rate_hz: fs,
        samples: series.samples().len(),
        frequency_resolution_hz: rep.phase.resolution(),
        slope_rad_per_hz: rep.slope,
        alpha_cal_f_per_hz: alpha,
        phase_variance_rad2: variance,
        parseval_ratio: rep.phase.band_rms(0.5 * fs).powi(2) / variance,
        phase_floor_rad_per_rthz: rep.phase.mean_level(0.05 * fs, 0.45 * fs),
        capacitance_1hz_f: rep.bands[0].1,
        white_noise_prediction_f_per_rthz: alpha * variance.sqrt() * (2.0 / fs).sqrt() / rep.slope.abs(),
        bands: rep.bands[1..].iter().map(|&(b, c)| Band { bandwidth_hz: b, capacitance_rms_f: c }).collect(),
    };
    let artifacts = vec![
        ("phase_asd.csv".into(), csv_bytes(|w| io::write_spectrum(w, &rep.phase))?),
        ("frequency_asd.csv".into(), csv_bytes(|w| io::write_spectrum(w, &rep.frequency))?),
        ("capacitance_asd.csv".into(), csv_bytes(|w| io::write_spectrum(w, &rep.capacitance))?),
    ];
    Ok(Outcome { result: to_value(&report), artifacts, input: vec![bytes], config: config_bytes, ..Outcome::default() })
}
