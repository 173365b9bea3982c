use serde::Serialize;

use scanres_core::resonator::{self, FitConfig};
use scanres_core::{average_photon_number, io, total_q};

use super::{estimated, in_file, read_input, to_value, Estimated, Outcome};
use crate::cli::Common;
use crate::config::{self, FitS11Config};
use crate::error::CliResult;

#[derive(Serialize)]
struct FitReport {
    points: usize,
    f0_hz: Estimated,
    qi: Estimated,
    qc: Estimated,
    theta_rad: Estimated,
    b_mag: Estimated,
    b_phase_rad: Estimated,
    tau_s: Estimated,
    q_total: f64,
    photons_per_watt: f64,
    residual_rms: f64,
    initial_residual_rms: f64,
    iterations: usize,
    converged: bool,
}

pub fn fit_s11(common: &Common) -> CliResult<Outcome> {
    let (cfg, config_bytes) = config::load::<FitS11Config>(common.config.as_deref())?;
    let (path, bytes) = read_input(common)?;
    let trace = io::read_trace(bytes.as_slice()).map_err(in_file(&path))?;
    let fit_config = FitConfig { max_iter: cfg.max_iter, rel_tol: cfg.rel_tol, ..FitConfig::default() };
    let fit = resonator::fit_s11(&trace, &fit_config, None).map_err(in_file(&path))?;
    let (p, s) = (fit.params, fit.stderr);
    let q = total_q(&p)?;
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push(format!("fit did not converge within {} iterations", cfg.max_iter));
    }
    let report = FitReport {
        points: trace.len(),
        f0_hz: estimated(p.f0, s.f0),
        qi: estimated(p.qi, s.qi),
        qc: estimated(p.qc, s.qc),
        theta_rad: estimated(p.theta, s.theta),
        b_mag: estimated(p.b_mag, s.b_mag),
        b_phase_rad: estimated(p.b_phase, s.b_phase),
        tau_s: estimated(p.tau, s.tau),
        q_total: q,
        photons_per_watt: average_photon_number(q, p.qc, p.f0, 1.0)?,
        residual_rms: fit.residual_rms,
        initial_residual_rms: fit.initial_residual_rms,
        iterations: fit.iterations,
        converged: fit.converged,
    };
    Ok(Outcome { result: to_value(&report), warnings, input: vec![bytes], config: config_bytes, ..Outcome::default() })
}
