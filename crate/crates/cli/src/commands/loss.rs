use std::f64::consts::PI;

use serde::Serialize;

use scanres_core::dbm_to_watts;
use scanres_core::io::{self, SweepAxis};
use scanres_core::loss::{
    fit_power_sweep, fit_temperature_sweep, qi_power_model, qi_temperature_model, CompositeLossParams, QpParams,
    TlsParams,
};

use super::{in_file, read_input, to_value, Estimated, Outcome};
use crate::cli::{Common, SweepMode};
use crate::config::{self, LossConfig};
use crate::error::{data, CliResult};

#[derive(Serialize)]
struct PointResidual {
    x: f64,
    qi: f64,
    qi_model: f64,
    relative_residual: f64,
}

#[derive(Serialize)]
struct PowerReport {
    mode: &'static str,
    temperature_k: f64,
    delta0: Estimated,
    pc_w: Estimated,
    q_sat: Estimated,
    residual_rms: f64,
    iterations: usize,
    converged: bool,
    /// x is the drive power in dBm.
    points: Vec<PointResidual>,
}

#[derive(Serialize)]
struct TemperatureReport {
    mode: &'static str,
    p_in_w: f64,
    alpha_k: f64,
    delta0: Estimated,
    q_other: Estimated,
    tc_k: Estimated,
    tc_unconstrained: bool,
    residual_rms: f64,
    iterations: usize,
    converged: bool,
    /// x is the temperature in K.
    points: Vec<PointResidual>,
}

fn residuals(points: &[(f64, f64)], model: impl Fn(f64) -> scanres_core::Result<f64>) -> CliResult<Vec<PointResidual>> {
    points
        .iter()
        .map(|&(x, qi)| {
            let m = model(x)?;
            Ok(PointResidual { x, qi, qi_model: m, relative_residual: (qi - m) / m })
        })
        .collect()
}

pub fn loss_sweep(mode: SweepMode, common: &Common) -> CliResult<Outcome> {
    let (cfg, config_bytes) = config::load::<LossConfig>(common.config.as_deref())?;
    let (path, bytes) = read_input(common)?;
    let sweep = io::read_sweep(bytes.as_slice()).map_err(in_file(&path))?;
    let omega = 2.0 * PI * cfg.f0_ghz * 1e9;
    let mut warnings = Vec::new();
    let result = match (mode, sweep.axis) {
        (SweepMode::Power, SweepAxis::Power) => {
            let watts: Vec<(f64, f64)> =
                sweep.points.iter().map(|&(p, q)| Ok((dbm_to_watts(p)?, q))).collect::<CliResult<_>>()?;
            let fit = fit_power_sweep(&watts, omega, cfg.temperature_k).map_err(in_file(&path))?;
            let tls = TlsParams::new(fit.delta0.value, fit.pc_watts.value)?;
            let points = residuals(&sweep.points, |p| {
                qi_power_model(dbm_to_watts(p)?, fit.q_sat.value, &tls, omega, cfg.temperature_k)
            })?;
            if !fit.converged {
                warnings.push("power-sweep fit did not converge".into());
            }
            to_value(&PowerReport {
                mode: "power",
                temperature_k: cfg.temperature_k,
                delta0: fit.delta0.into(),
                pc_w: fit.pc_watts.into(),
                q_sat: fit.q_sat.into(),
                residual_rms: fit.residual_rms,
                iterations: fit.iterations,
                converged: fit.converged,
                points,
            })
        }
        (SweepMode::Temperature, SweepAxis::Temperature) => {
            let p_in = dbm_to_watts(cfg.p_in_dbm)?;
            let pc = cfg.pc_dbm.map(dbm_to_watts).transpose()?;
            let fit = fit_temperature_sweep(&sweep.points, omega, p_in, pc, cfg.alpha_k).map_err(in_file(&path))?;
            let params = CompositeLossParams {
                tls: TlsParams::new(fit.delta0.value, pc.unwrap_or(1.0))?,
                qp: QpParams::new(fit.tc.value, cfg.alpha_k)?,
                q_sat: fit.q_other.value,
                q_other: fit.q_other.value,
            };
            let drive = if pc.is_some() { p_in } else { 0.0 };
            let points = residuals(&sweep.points, |t| qi_temperature_model(t, &params, omega, drive))?;
            if !fit.converged {
                warnings.push("temperature-sweep fit did not converge".into());
            }
            if fit.tc_unconstrained {
                warnings.push("Tc is not constrained by the data".into());
            }
            to_value(&TemperatureReport {
                mode: "temperature",
                p_in_w: p_in,
                alpha_k: cfg.alpha_k,
                delta0: fit.delta0.into(),
                q_other: fit.q_other.into(),
                tc_k: fit.tc.into(),
                tc_unconstrained: fit.tc_unconstrained,
                residual_rms: fit.residual_rms,
                iterations: fit.iterations,
                converged: fit.converged,
                points,
            })
        }
        (mode, axis) => {
            return Err(data(format!(
                "{}: --mode {} does not match a sweep over {}",
                path.display(),
                match mode {
                    SweepMode::Power => "power",
                    SweepMode::Temperature => "temperature",
                },
                match axis {
                    SweepAxis::Power => "power (p_dbm)",
                    SweepAxis::Temperature => "temperature (t_k)",
                }
            )))
        }
    };
    Ok(Outcome { result, warnings, input: vec![bytes], config: config_bytes, ..Outcome::default() })
}
