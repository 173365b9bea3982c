use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use scanres_core::resonator::ResonatorParams;
use scanres_core::tip::{CalibrationResult, TipModel};

use crate::error::{usage, CliResult};

/// Parses `path` as TOML into `T`, or returns `T::default()` when no file is given.
/// The raw bytes are returned for hashing.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<(T, Option<Vec<u8>>)> {
    let Some(path) = path else {
        return Ok((T::default(), None));
    };
    let bytes = std::fs::read(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| usage(format!("config {} is not UTF-8", path.display())))?;
    let value = toml::from_str(text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    Ok((value, Some(bytes)))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonatorBlock {
    pub f0_ghz: f64,
    pub qi: f64,
    pub qc: f64,
    pub theta_rad: f64,
}

impl Default for ResonatorBlock {
    fn default() -> Self {
        ResonatorBlock { f0_ghz: 7.955, qi: 11_900.0, qc: 3_000.0, theta_rad: 0.0 }
    }
}

impl ResonatorBlock {
    pub fn params(&self) -> ResonatorParams {
        ResonatorParams::ideal(self.f0_ghz * 1e9, self.qi, self.qc, self.theta_rad)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TipBlock {
    pub radius_um: f64,
    pub stray_capacitance_ff: f64,
    pub series_terms: usize,
}

impl Default for TipBlock {
    fn default() -> Self {
        TipBlock { radius_um: 1.0, stray_capacitance_ff: 0.0, series_terms: 20 }
    }
}

impl TipBlock {
    pub fn model(&self) -> TipModel {
        TipModel {
            radius: self.radius_um * 1e-6,
            c_stray: self.stray_capacitance_ff * 1e-15,
            series_terms: self.series_terms,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationBlock {
    pub d0_um: f64,
    pub alpha_cal_ff_per_hz: f64,
}

impl Default for CalibrationBlock {
    fn default() -> Self {
        CalibrationBlock { d0_um: 5.0, alpha_cal_ff_per_hz: 1.12e-8 }
    }
}

impl CalibrationBlock {
    pub fn result(&self) -> CalibrationResult {
        CalibrationResult {
            d0: self.d0_um * 1e-6,
            alpha_cal: self.alpha_cal_ff_per_hz * 1e-15,
            residual_rms: 0.0,
            d0_stderr: 0.0,
            alpha_cal_stderr: 0.0,
            iterations: 0,
            converged: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitS11Config {
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for FitS11Config {
    fn default() -> Self {
        FitS11Config { max_iter: 200, rel_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub f0_ghz: f64,
    /// Bath temperature of a power sweep.
    pub temperature_k: f64,
    /// Drive power of a temperature sweep.
    pub p_in_dbm: f64,
    /// TLS critical power for a temperature sweep; omit to treat the drive as unsaturating.
    pub pc_dbm: Option<f64>,
    pub alpha_k: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { f0_ghz: 7.955, temperature_k: 0.01, p_in_dbm: -141.0, pc_dbm: None, alpha_k: 1.0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateConfig {
    pub tip: TipBlock,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelName {
    #[default]
    Phase,
    Frequency,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub tip: TipBlock,
    pub resonator: ResonatorBlock,
    pub calibration: CalibrationBlock,
    pub height_um: f64,
    pub noise_rms_af: f64,
    pub channel: ChannelName,
    pub seed: Option<u64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            tip: TipBlock { radius_um: 0.5, ..TipBlock::default() },
            resonator: ResonatorBlock::default(),
            calibration: CalibrationBlock::default(),
            height_um: 0.5,
            noise_rms_af: 0.0,
            channel: ChannelName::Phase,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityConfig {
    pub resonator: ResonatorBlock,
    pub alpha_cal_ff_per_hz: f64,
    pub segment_len: usize,
    pub overlap: f64,
    pub bands_hz: Vec<f64>,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            resonator: ResonatorBlock::default(),
            alpha_cal_ff_per_hz: 1.12e-8,
            segment_len: 1024,
            overlap: 0.5,
            bands_hz: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransmonConfig {
    pub f_ge_mhz: Option<f64>,
    pub f_gf2_mhz: Option<f64>,
    pub ec_ghz: Option<f64>,
    pub ej_ghz: Option<f64>,
    pub ng: f64,
    pub ncut: usize,
}

impl Default for TransmonConfig {
    fn default() -> Self {
        TransmonConfig { f_ge_mhz: None, f_gf2_mhz: None, ec_ghz: None, ej_ghz: None, ng: 0.0, ncut: 30 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PurcellConfig {
    pub tip: TipBlock,
    /// Qubit minus resonator frequency.
    pub delta_mhz: f64,
    /// Resonator energy decay rate.
    pub kappa_per_s: f64,
    pub gamma_other_per_s: f64,
    pub d_ref_um: f64,
    /// Coupling at `d_ref_um`; fitted from `t1_ref_us` when absent.
    pub g_ref_mhz: Option<f64>,
    pub t1_ref_us: Option<f64>,
    pub d_min_um: f64,
    pub d_max_um: f64,
    pub points: usize,
}

impl Default for PurcellConfig {
    fn default() -> Self {
        PurcellConfig {
            tip: TipBlock::default(),
            delta_mhz: -276.0,
            kappa_per_s: 8.34e6,
            gamma_other_per_s: 1e5,
            d_ref_um: 2.5,
            g_ref_mhz: None,
            t1_ref_us: Some(3.8),
            d_min_um: 0.5,
            d_max_um: 50.0,
            points: 40,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceConfig {}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: Option<u64>,
    pub trace: SynthTrace,
    pub power_sweep: SynthPowerSweep,
    pub temperature_sweep: SynthTemperatureSweep,
    pub approach: SynthApproach,
    pub timeseries: SynthTimeseries,
    pub map: SynthMap,
    pub coherence: SynthCoherence,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthTrace {
    pub f0_ghz: f64,
    pub qi: f64,
    pub qc: f64,
    pub theta_rad: f64,
    pub b_mag: f64,
    pub b_phase_rad: f64,
    pub tau_ns: f64,
    pub points: usize,
    /// Span in units of the loaded linewidth f0/Q.
    pub linewidths: f64,
    pub noise_sigma: f64,
}

impl Default for SynthTrace {
    fn default() -> Self {
        SynthTrace {
            f0_ghz: 7.955,
            qi: 11_900.0,
            qc: 12_000.0,
            theta_rad: -0.16,
            b_mag: 1.0,
            b_phase_rad: 0.0,
            tau_ns: 50.0,
            points: 401,
            linewidths: 10.0,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthPowerSweep {
    pub f0_ghz: f64,
    pub temperature_k: f64,
    pub delta0: f64,
    pub pc_dbm: f64,
    pub q_sat: f64,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    pub points: usize,
    /// Relative Gaussian noise on Qi.
    pub noise_rel: f64,
}

impl Default for SynthPowerSweep {
    fn default() -> Self {
        SynthPowerSweep {
            f0_ghz: 7.955,
            temperature_k: 0.01,
            delta0: 2.3e-5,
            pc_dbm: -130.0,
            q_sat: 18_000.0,
            p_min_dbm: -160.0,
            p_max_dbm: -100.0,
            points: 25,
            noise_rel: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthTemperatureSweep {
    pub f0_ghz: f64,
    pub p_in_dbm: f64,
    pub delta0: f64,
    pub pc_dbm: f64,
    pub tc_k: f64,
    pub alpha_k: f64,
    pub q_other: f64,
    pub t_min_k: f64,
    pub t_max_k: f64,
    pub points: usize,
    pub noise_rel: f64,
}

impl Default for SynthTemperatureSweep {
    fn default() -> Self {
        SynthTemperatureSweep {
            f0_ghz: 7.955,
            p_in_dbm: -141.0,
            delta0: 2.3e-5,
            pc_dbm: -130.0,
            tc_k: 10.0,
            alpha_k: 1.0,
            q_other: 18_000.0,
            t_min_k: 0.01,
            t_max_k: 2.5,
            points: 40,
            noise_rel: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthApproach {
    pub tip: TipBlock,
    pub d0_um: f64,
    pub alpha_cal_ff_per_hz: f64,
    pub z_max_um: f64,
    pub points: usize,
    pub noise_rel: f64,
}

impl Default for SynthApproach {
    fn default() -> Self {
        SynthApproach {
            tip: TipBlock::default(),
            d0_um: 5.0,
            alpha_cal_ff_per_hz: 1.12e-8,
            z_max_um: 4.5,
            points: 30,
            noise_rel: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthTimeseries {
    pub sample_rate_hz: f64,
    pub samples: usize,
    pub sigma_rad: f64,
}

impl Default for SynthTimeseries {
    fn default() -> Self {
        SynthTimeseries { sample_rate_hz: 1e3, samples: 1 << 16, sigma_rad: 1e-3 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthMap {
    /// Cells per side.
    pub size: usize,
    pub pitch_um: f64,
    pub hole_um: f64,
    /// Relative permittivity exposed inside the hole; metal when absent.
    pub hole_permittivity: Option<f64>,
}

impl Default for SynthMap {
    fn default() -> Self {
        SynthMap { size: 100, pitch_um: 0.2, hole_um: 10.0, hole_permittivity: Some(9.4) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    #[default]
    T1,
    Ramsey,
    Echo,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthCoherence {
    pub kind: ExperimentName,
    pub time_constant_us: f64,
    pub detuning_mhz: f64,
    pub t_max_us: f64,
    pub points: usize,
    pub noise: f64,
    pub quasi_static_sigma_khz: f64,
    pub realizations: usize,
}

impl Default for SynthCoherence {
    fn default() -> Self {
        SynthCoherence {
            kind: ExperimentName::T1,
            time_constant_us: 3.8,
            detuning_mhz: 0.5,
            t_max_us: 15.0,
            points: 100,
            noise: 0.0,
            quasi_static_sigma_khz: 0.0,
            realizations: 200,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<ScanConfig>("height_um = 0.5\nheight = 1").is_err());
        assert!(toml::from_str::<ScanConfig>("[tip]\nradius = 1.0").is_err());
        let c: ScanConfig = toml::from_str("height_um = 0.7\n[tip]\nradius_um = 0.4").unwrap();
        assert_eq!(c.height_um, 0.7);
        assert_eq!(c.tip.radius_um, 0.4);
        assert_eq!(c.tip.series_terms, 20);
    }

    #[test]
    fn empty_config_gives_defaults() {
        let c: PurcellConfig = toml::from_str("").unwrap();
        assert_eq!(c.delta_mhz, -276.0);
        assert!(toml::from_str::<CoherenceConfig>("x = 1").is_err());
    }
}
