use std::f64::consts::PI;

use serde_json::json;

use scanres_core::io::{self, Sweep, SweepAxis};
use scanres_core::loss::{qi_power_model, qi_temperature_model, CompositeLossParams, QpParams, TlsParams};
use scanres_core::qubit::{simulate_decay, DecayTruth, Experiment, QuasiStatic};
use scanres_core::resonator::{linewidth_grid, synthesize_trace, NoiseSpec, ResonatorParams};
use scanres_core::sensitivity::PhaseTimeSeries;
use scanres_core::tip::{approach_shift, Material, MaterialMap};
use scanres_core::{dbm_to_watts, rng};

use super::{csv_bytes, json_bytes, require_seed, seed, Outcome};
use crate::cli::{Common, SynthKind};
use crate::config::{self, ExperimentName, SynthConfig};
use crate::error::{usage, CliResult};

/// Relative Gaussian noise per point, one stream per file.
fn jitter(values: &mut [f64], noise_rel: f64, seed: u64) {
    if noise_rel > 0.0 {
        let mut r = rng::stream(seed, 0);
        values.iter_mut().for_each(|v| *v *= 1.0 + rng::gaussian(&mut r, noise_rel));
    }
}

fn stochastic_seed(common: &Common, cfg: &SynthConfig, noisy: bool, what: &str) -> CliResult<Option<u64>> {
    if noisy {
        require_seed(common, cfg.seed, what).map(Some)
    } else {
        Ok(seed(common, cfg.seed))
    }
}

fn linear_grid(lo: f64, hi: f64, n: usize) -> CliResult<Vec<f64>> {
    if n < 2 || !(hi > lo) {
        return Err(usage("grid needs at least 2 points and an increasing range"));
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

pub fn synth(kind: SynthKind, common: &Common) -> CliResult<Outcome> {
    let (cfg, config_bytes) = config::load::<SynthConfig>(common.config.as_deref())?;
    if common.output.is_none() {
        return Err(usage("synth writes files: --output is required"));
    }
    let (artifacts, truth, seed) = match kind {
        SynthKind::Trace => {
            let c = &cfg.trace;
            let seed = stochastic_seed(common, &cfg, c.noise_sigma > 0.0, "trace noise")?;
            let p = ResonatorParams {
                f0: c.f0_ghz * 1e9,
                qi: c.qi,
                qc: c.qc,
                theta: c.theta_rad,
                b_mag: c.b_mag,
                b_phase: c.b_phase_rad,
                tau: c.tau_ns * 1e-9,
            };
            let freqs = linewidth_grid(&p, c.linewidths, c.points)?;
            let trace = synthesize_trace(&p, &freqs, &NoiseSpec { sigma: c.noise_sigma, seed: seed.unwrap_or(0) })?;
            let truth = json!({
                "f0_hz": p.f0, "qi": p.qi, "qc": p.qc, "theta_rad": p.theta,
                "b_mag": p.b_mag, "b_phase_rad": p.b_phase, "tau_s": p.tau, "noise_sigma": c.noise_sigma,
            });
            (vec![("trace.csv".to_owned(), csv_bytes(|w| io::write_trace(w, &trace))?)], truth, seed)
        }
        SynthKind::PowerSweep => {
            let c = &cfg.power_sweep;
            let seed = stochastic_seed(common, &cfg, c.noise_rel > 0.0, "sweep noise")?;
            let omega = 2.0 * PI * c.f0_ghz * 1e9;
            let tls = TlsParams::new(c.delta0, dbm_to_watts(c.pc_dbm)?)?;
            let dbm = linear_grid(c.p_min_dbm, c.p_max_dbm, c.points)?;
            let mut qi = dbm
                .iter()
                .map(|&p| qi_power_model(dbm_to_watts(p)?, c.q_sat, &tls, omega, c.temperature_k))
                .collect::<scanres_core::Result<Vec<_>>>()?;
            jitter(&mut qi, c.noise_rel, seed.unwrap_or(0));
            let sweep = Sweep { axis: SweepAxis::Power, points: dbm.into_iter().zip(qi).collect() };
            let truth = json!({
                "f0_hz": c.f0_ghz * 1e9, "temperature_k": c.temperature_k, "delta0": c.delta0,
                "pc_w": tls.pc_watts, "q_sat": c.q_sat, "noise_rel": c.noise_rel,
            });
            (vec![("power_sweep.csv".to_owned(), csv_bytes(|w| io::write_sweep(w, &sweep))?)], truth, seed)
        }
        SynthKind::TemperatureSweep => {
            let c = &cfg.temperature_sweep;
            let seed = stochastic_seed(common, &cfg, c.noise_rel > 0.0, "sweep noise")?;
            let omega = 2.0 * PI * c.f0_ghz * 1e9;
            let params = CompositeLossParams {
                tls: TlsParams::new(c.delta0, dbm_to_watts(c.pc_dbm)?)?,
                qp: QpParams::new(c.tc_k, c.alpha_k)?,
                q_sat: c.q_other,
                q_other: c.q_other,
            };
            let p_in = dbm_to_watts(c.p_in_dbm)?;
            let temps = linear_grid(c.t_min_k, c.t_max_k, c.points)?;
            let mut qi = temps
                .iter()
                .map(|&t| qi_temperature_model(t, &params, omega, p_in))
                .collect::<scanres_core::Result<Vec<_>>>()?;
            jitter(&mut qi, c.noise_rel, seed.unwrap_or(0));
            let sweep = Sweep { axis: SweepAxis::Temperature, points: temps.into_iter().zip(qi).collect() };
            let truth = json!({
                "f0_hz": c.f0_ghz * 1e9, "p_in_w": p_in, "delta0": c.delta0, "pc_w": params.tls.pc_watts,
                "tc_k": c.tc_k, "alpha_k": c.alpha_k, "q_other": c.q_other, "noise_rel": c.noise_rel,
            });
            (vec![("temperature_sweep.csv".to_owned(), csv_bytes(|w| io::write_sweep(w, &sweep))?)], truth, seed)
        }
        SynthKind::Approach => {
            let c = &cfg.approach;
            let seed = stochastic_seed(common, &cfg, c.noise_rel > 0.0, "approach noise")?;
            let tip = c.tip.model();
            let (d0, alpha) = (c.d0_um * 1e-6, c.alpha_cal_ff_per_hz * 1e-15);
            let z = linear_grid(0.0, c.z_max_um * 1e-6, c.points)?;
            let mut df =
                z.iter().map(|&z| approach_shift(z, d0, alpha, &tip)).collect::<scanres_core::Result<Vec<_>>>()?;
            jitter(&mut df, c.noise_rel, seed.unwrap_or(0));
            let points: Vec<(f64, f64)> = z.into_iter().zip(df).collect();
            let truth = json!({
                "d0_m": d0, "alpha_cal_f_per_hz": alpha, "tip_radius_m": tip.radius, "noise_rel": c.noise_rel,
            });
            (vec![("approach.csv".to_owned(), csv_bytes(|w| io::write_approach(w, &points))?)], truth, seed)
        }
        SynthKind::Timeseries => {
            let c = &cfg.timeseries;
            let seed = require_seed(common, cfg.seed, "white phase noise")?;
            let series = PhaseTimeSeries::white(c.sigma_rad, c.sample_rate_hz, c.samples, seed)?;
            let truth = json!({
                "sample_rate_hz": c.sample_rate_hz, "samples": c.samples, "sigma_rad": c.sigma_rad,
                "white_asd_rad_per_rthz": c.sigma_rad * (2.0 / c.sample_rate_hz).sqrt(),
            });
            (vec![("timeseries.csv".to_owned(), csv_bytes(|w| io::write_timeseries(w, &series))?)], truth, Some(seed))
        }
        SynthKind::Map => {
            let c = &cfg.map;
            let hole = match c.hole_permittivity {
                Some(eps) => Material::Dielectric(eps),
                None => Material::Metal,
            };
            let map = MaterialMap::square_hole(c.size, c.pitch_um * 1e-6, c.hole_um * 1e-6, hole)?;
            let mut grid = Vec::new();
            let side = io::write_map(&mut grid, &map)?;
            let truth = json!({
                "size": c.size, "pitch_m": map.pitch, "hole_m": c.hole_um * 1e-6,
                "hole_permittivity": c.hole_permittivity,
            });
            (
                vec![("map.csv".to_owned(), grid), ("map.json".to_owned(), json_bytes(&side))],
                truth,
                seed(common, cfg.seed),
            )
        }
        SynthKind::Coherence => {
            let c = &cfg.coherence;
            let noisy = c.noise > 0.0 || (c.kind == ExperimentName::Ramsey && c.quasi_static_sigma_khz > 0.0);
            let seed = stochastic_seed(common, &cfg, noisy, "coherence noise")?;
            let kind = match c.kind {
                ExperimentName::T1 => Experiment::T1,
                ExperimentName::Ramsey => Experiment::Ramsey,
                ExperimentName::Echo => Experiment::Echo,
            };
            let delays = linear_grid(0.0, c.t_max_us * 1e-6, c.points)?;
            let truth_params = DecayTruth { time_constant: c.time_constant_us * 1e-6, detuning: c.detuning_mhz * 1e6 };
            let qs = (c.quasi_static_sigma_khz > 0.0)
                .then_some(QuasiStatic { sigma: c.quasi_static_sigma_khz * 1e3, realizations: c.realizations });
            let trace = simulate_decay(kind, &truth_params, &delays, c.noise, seed.unwrap_or(0), qs)?;
            let truth = json!({
                "kind": kind, "time_constant_s": truth_params.time_constant, "detuning_hz": truth_params.detuning,
                "noise": c.noise, "quasi_static_sigma_hz": c.quasi_static_sigma_khz * 1e3,
            });
            (vec![("coherence.csv".to_owned(), csv_bytes(|w| io::write_coherence(w, &trace))?)], truth, seed)
        }
    };
    let files: Vec<&str> = artifacts.iter().map(|a| a.0.as_str()).collect();
    Ok(Outcome {
        result: json!({ "files": files, "truth": truth }),
        artifacts,
        seed,
        config: config_bytes,
        ..Outcome::default()
    })
}
