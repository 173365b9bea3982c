use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coupling::{dispersive_shift, QubitResonatorParams};
use super::transmon::{transitions, TransmonParams};
use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoToneConfig {
    /// Low-power half width of the g→e line, Hz.
    pub gamma2: f64,
    /// Drive power at which the g→e transition saturates, same unit as the power axis.
    pub p_sat: f64,
    /// Response level regarded as indistinguishable from background.
    pub noise_floor: f64,
}

impl Default for TwoToneConfig {
    fn default() -> Self {
        TwoToneConfig { gamma2: 0.5e6, p_sat: 1.0, noise_floor: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoToneMap {
    pub powers: Vec<f64>,
    pub drive_freqs: Vec<f64>,
    /// Row per power, column per drive frequency: depth of the resonator response change.
    pub response: Vec<Vec<f64>>,
    pub f_ge: f64,
    pub f_gf2: f64,
    /// Overall scale of the response, in (0, 1].
    pub contrast: f64,
}

fn lorentzian(f: f64, centre: f64, half_width: f64) -> f64 {
    1.0 / (1.0 + ((f - centre) / half_width).powi(2))
}

/// Half width of the g→e line at relative drive `s = P/P_sat`.
pub fn power_broadened_width(gamma2: f64, s: f64) -> f64 {
    gamma2 * (1.0 + s).sqrt()
}

/// Phenomenological two-tone map.
///
/// The g→e line has amplitude s/(1+s) and half width Γ2·√(1+s); the two-photon
/// g→f/2 line shares the width and has amplitude min(s², g→e amplitude). With
/// a resonator description the map is scaled by (2χ/κ)²/(1 + (2χ/κ)²).
pub fn two_tone_spectrum(
    p: &TransmonParams,
    qr: Option<&QubitResonatorParams>,
    powers: &[f64],
    drive_freqs: &[f64],
    config: &TwoToneConfig,
) -> Result<TwoToneMap> {
    ensure_positive("gamma2", config.gamma2)?;
    ensure_positive("p_sat", config.p_sat)?;
    if powers.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("powers", "must be finite and >= 0"));
    }
    let t = transitions(p)?;
    let contrast = match qr {
        Some(qr) => {
            qr.validate()?;
            let chi = dispersive_shift(qr.g, qr.delta, p.ec)?;
            let kappa_hz = qr.kappa / (2.0 * std::f64::consts::PI);
            let x = (2.0 * chi / kappa_hz).powi(2);
            x / (1.0 + x)
        }
        None => 1.0,
    };
    let response = powers
        .par_iter()
        .map(|&power| {
            let s = power / config.p_sat;
            let width = power_broadened_width(config.gamma2, s);
            let a_ge = s / (1.0 + s);
            let a_gf = (s * s).min(a_ge);
            drive_freqs
                .iter()
                .map(|&f| contrast * (a_ge * lorentzian(f, t.f_ge, width) + a_gf * lorentzian(f, t.f_gf2, width)))
                .collect()
        })
        .collect();
    Ok(TwoToneMap {
        powers: powers.to_vec(),
        drive_freqs: drive_freqs.to_vec(),
        response,
        f_ge: t.f_ge,
        f_gf2: t.f_gf2,
        contrast,
    })
}
