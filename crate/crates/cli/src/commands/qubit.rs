use serde::Serialize;

use scanres_core::io;
use scanres_core::qubit::{
    coupling_vs_distance, fit_decay, fit_g_ref, gamma1_vs_distance, invert_spectrum, purcell_rate, transitions,
    CouplingModel, Experiment, QubitResonatorParams, Regime, TransmonParams,
};

use super::{in_file, read_input, to_value, Estimated, Outcome};
use crate::cli::{Common, ExperimentKind};
use crate::config::{self, CoherenceConfig, PurcellConfig, TransmonConfig};
use crate::error::{data, usage, CliResult};

#[derive(Serialize)]
struct Spectrum {
    ec_hz: f64,
    ej_hz: f64,
    ej_over_ec: f64,
    regime: Regime,
    f_ge_hz: f64,
    f_gf2_hz: f64,
    anharmonicity_hz: f64,
    /// √(8·EJ·EC) − EC
    asymptotic_f_ge_hz: f64,
}

fn spectrum(p: &TransmonParams) -> CliResult<Spectrum> {
    let t = transitions(p)?;
    Ok(Spectrum {
        ec_hz: p.ec,
        ej_hz: p.ej,
        ej_over_ec: p.ej / p.ec,
        regime: p.regime(),
        f_ge_hz: t.f_ge,
        f_gf2_hz: t.f_gf2,
        anharmonicity_hz: t.anharmonicity,
        asymptotic_f_ge_hz: p.asymptotic_f_ge(),
    })
}

#[derive(Serialize)]
struct InversionReport {
    /// 2·(f_ge − f_gf2)
    ec_estimate_hz: f64,
    iterations: usize,
    max_error_hz: f64,
    spectrum: Spectrum,
}

#[derive(Serialize)]
struct DeviceReport {
    device: String,
    t2r_s: f64,
    /// (f_ge − asymptotic)/asymptotic
    relative_deviation: f64,
    spectrum: Spectrum,
}

pub fn transmon(common: &Common) -> CliResult<Outcome> {
    let (cfg, config_bytes) = config::load::<TransmonConfig>(common.config.as_deref())?;
    let with = |ec: f64, ej: f64| -> CliResult<TransmonParams> {
        let p = TransmonParams { ec, ej, ng: cfg.ng, ncut: cfg.ncut };
        p.validate().map_err(|e| usage(e.to_string()))?;
        Ok(p)
    };
    let mut input = Vec::new();
    let mut warnings = Vec::new();
    let result = if common.input.is_some() {
        let (path, bytes) = read_input(common)?;
        let rows = io::read_devices(bytes.as_slice()).map_err(in_file(&path))?;
        input.push(bytes);
        let devices = rows
            .into_iter()
            .map(|row| {
                let s = spectrum(&with(row.ec_ghz * 1e9, row.ej_ghz * 1e9)?)?;
                if s.regime != Regime::Transmon {
                    warnings.push(format!("{}: EJ/EC = {:.2} is charge sensitive", row.device, s.ej_over_ec));
                }
                Ok(DeviceReport {
                    t2r_s: row.t2r_us * 1e-6,
                    relative_deviation: (s.f_ge_hz - s.asymptotic_f_ge_hz) / s.asymptotic_f_ge_hz,
                    device: row.device,
                    spectrum: s,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        serde_json::json!({ "devices": to_value(&devices) })
    } else {
        match (cfg.f_ge_mhz, cfg.f_gf2_mhz, cfg.ec_ghz, cfg.ej_ghz) {
            (Some(ge), Some(gf2), None, None) => {
                let inv = invert_spectrum(ge * 1e6, gf2 * 1e6)?;
                let p = with(inv.params.ec, inv.params.ej)?;
                to_value(&InversionReport {
                    ec_estimate_hz: inv.ec_estimate,
                    iterations: inv.iterations,
                    max_error_hz: inv.max_error_hz,
                    spectrum: spectrum(&p)?,
                })
            }
            (None, None, Some(ec), Some(ej)) => {
                let s = spectrum(&with(ec * 1e9, ej * 1e9)?)?;
                if s.regime != Regime::Transmon {
                    warnings.push(format!("EJ/EC = {:.2} is charge sensitive", s.ej_over_ec));
                }
                to_value(&s)
            }
            _ => {
                return Err(usage(
                    "set either f_ge_mhz and f_gf2_mhz, or ec_ghz and ej_ghz, or pass a device table with --input",
                ))
            }
        }
    };
    Ok(Outcome { result, warnings, input, config: config_bytes, ..Outcome::default() })
}

#[derive(Serialize)]
struct CurvePoint {
    d_m: f64,
    g_hz: f64,
    purcell_per_s: f64,
    gamma1_per_s: f64,
    t1_s: f64,
}

#[derive(Serialize)]
struct PurcellReport {
    g_ref_hz: f64,
    g_ref_fitted: bool,
    d_ref_m: f64,
    delta_hz: f64,
    kappa_per_s: f64,
    gamma_other_per_s: f64,
    t1_at_ref_s: f64,
    curve: Vec<CurvePoint>,
}

pub fn purcell(common: &Common) -> CliResult<Outcome> {
    let (cfg, config_bytes) = config::load::<PurcellConfig>(common.config.as_deref())?;
    if cfg.points < 2 || !(cfg.d_min_um > 0.0 && cfg.d_max_um > cfg.d_min_um) {
        return Err(usage("distance grid needs points >= 2 and 0 < d_min_um < d_max_um"));
    }
    let tip = cfg.tip.model();
    let base = QubitResonatorParams { g: 0.0, delta: cfg.delta_mhz * 1e6, kappa: cfg.kappa_per_s };
    base.validate().map_err(|e| usage(e.to_string()))?;
    let d_ref = cfg.d_ref_um * 1e-6;
    let (g_ref, fitted) = match (cfg.g_ref_mhz, cfg.t1_ref_us) {
        (Some(g), _) => (g * 1e6, false),
        (None, Some(t1)) => {
            let g = fit_g_ref(&[(d_ref, 1.0 / (t1 * 1e-6))], &base, &tip, d_ref, cfg.gamma_other_per_s)
                .map_err(|e| usage(format!("t1_ref_us: {e}")))?;
            (g, true)
        }
        (None, None) => return Err(usage("set g_ref_mhz or t1_ref_us")),
    };
    let coupling = CouplingModel { tip, g_ref, d_ref };
    let ratio = (cfg.d_max_um / cfg.d_min_um).powf(1.0 / (cfg.points - 1) as f64);
    let ds: Vec<f64> = (0..cfg.points).map(|k| cfg.d_min_um * 1e-6 * ratio.powi(k as i32)).collect();
    let curve = gamma1_vs_distance(&ds, &base, &coupling, cfg.gamma_other_per_s)?
        .into_iter()
        .map(|(d, gamma1)| {
            let g = coupling_vs_distance(d, &tip, g_ref, d_ref)?;
            Ok(CurvePoint {
                d_m: d,
                g_hz: g,
                purcell_per_s: purcell_rate(&QubitResonatorParams { g, ..base })?,
                gamma1_per_s: gamma1,
                t1_s: 1.0 / gamma1,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let gamma_ref = purcell_rate(&QubitResonatorParams { g: g_ref, ..base })? + cfg.gamma_other_per_s;
    let report = PurcellReport {
        g_ref_hz: g_ref,
        g_ref_fitted: fitted,
        d_ref_m: d_ref,
        delta_hz: base.delta,
        kappa_per_s: base.kappa,
        gamma_other_per_s: cfg.gamma_other_per_s,
        t1_at_ref_s: 1.0 / gamma_ref,
        curve,
    };
    Ok(Outcome { result: to_value(&report), config: config_bytes, ..Outcome::default() })
}

#[derive(Serialize)]
struct CoherenceReport {
    kind: Experiment,
    points: usize,
    time_constant_s: Estimated,
    detuning_hz: Option<Estimated>,
    amplitude: Estimated,
    offset: Estimated,
    residual_rms: f64,
    iterations: usize,
    converged: bool,
    undersampled: bool,
}

pub fn coherence(kind: ExperimentKind, common: &Common) -> CliResult<Outcome> {
    let (_, config_bytes) = config::load::<CoherenceConfig>(common.config.as_deref())?;
    let (path, bytes) = read_input(common)?;
    let kind = match kind {
        ExperimentKind::T1 => Experiment::T1,
        ExperimentKind::Ramsey => Experiment::Ramsey,
        ExperimentKind::Echo => Experiment::Echo,
    };
    let trace = io::read_coherence(bytes.as_slice(), kind).map_err(in_file(&path))?;
    let fit = fit_decay(&trace).map_err(in_file(&path))?;
    let mut warnings = Vec::new();
    if fit.undersampled {
        warnings.push("delays span less than 1.5 fitted time constants".into());
    }
    if !fit.converged {
        warnings.push("decay fit did not converge".into());
    }
    if !fit.time_constant.value.is_finite() {
        return Err(data("fitted time constant is not finite"));
    }
    let report = CoherenceReport {
        kind,
        points: trace.delays.len(),
        time_constant_s: fit.time_constant.into(),
        detuning_hz: fit.detuning.map(Into::into),
        amplitude: fit.amplitude.into(),
        offset: fit.offset.into(),
        residual_rms: fit.residual_rms,
        iterations: fit.iterations,
        converged: fit.converged,
        undersampled: fit.undersampled,
    };
    Ok(Outcome { result: to_value(&report), warnings, input: vec![bytes], config: config_bytes, ..Outcome::default() })
}
