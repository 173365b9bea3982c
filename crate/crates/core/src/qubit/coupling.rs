use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::tip::{cap_excess, TipModel};

/// Qubit-resonator pair in the dispersive regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitResonatorParams {
    /// Coupling g/2π, Hz.
    pub g: f64,
    /// Detuning (ω_q − ω_r)/2π, Hz, signed.
    pub delta: f64,
    /// Resonator energy decay rate ω_r/Q, s⁻¹.
    pub kappa: f64,
}

impl QubitResonatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(Error::invalid("g", format!("must be finite and >= 0, got {}", self.g)));
        }
        if !(self.delta.is_finite() && self.delta != 0.0) {
            return Err(Error::invalid("delta", "detuning must be finite and nonzero"));
        }
        ensure_positive("kappa", self.kappa)
    }
}

/// (g/Δ)²·κ, in the units of κ.
pub fn purcell_rate(qr: &QubitResonatorParams) -> Result<f64> {
    qr.validate()?;
    Ok((qr.g / qr.delta).powi(2) * qr.kappa)
}

/// χ = −g²·EC / (Δ·(Δ − EC)), Hz.
pub fn dispersive_shift(g: f64, delta: f64, ec: f64) -> Result<f64> {
    if !(g.is_finite() && delta.is_finite() && ec.is_finite() && ec >= 0.0) {
        return Err(Error::invalid("dispersive_shift", "inputs must be finite with EC >= 0"));
    }
    if delta == 0.0 || delta == ec {
        return Err(Error::invalid("delta", "resonant denominator"));
    }
    Ok(-g * g * ec / (delta * (delta - ec)))
}

/// g(d) = g_ref·C̃(d)/C̃(d_ref), with C̃ the distance-dependent tip capacitance.
pub fn coupling_vs_distance(d: f64, tip: &TipModel, g_ref: f64, d_ref: f64) -> Result<f64> {
    ensure_positive("d", d)?;
    ensure_positive("d_ref", d_ref)?;
    if !(g_ref.is_finite() && g_ref >= 0.0) {
        return Err(Error::invalid("g_ref", "must be finite and >= 0"));
    }
    Ok(g_ref * cap_excess(d, tip)? / cap_excess(d_ref, tip)?)
}

/// Distance-dependent coupling anchored at one reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingModel {
    pub tip: TipModel,
    /// g/2π at `d_ref`, Hz.
    pub g_ref: f64,
    pub d_ref: f64,
}

/// Γ1(d) = purcell_rate(g(d), Δ, κ) + Γ_other for each distance.
pub fn gamma1_vs_distance(
    ds: &[f64],
    base: &QubitResonatorParams,
    coupling: &CouplingModel,
    gamma_other: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(gamma_other.is_finite() && gamma_other >= 0.0) {
        return Err(Error::invalid("gamma_other", "must be finite and >= 0"));
    }
    ds.iter()
        .map(|&d| {
            let g = coupling_vs_distance(d, &coupling.tip, coupling.g_ref, coupling.d_ref)?;
            Ok((d, purcell_rate(&QubitResonatorParams { g, ..*base })? + gamma_other))
        })
        .collect()
}

/// Least-squares g_ref from measured (d, Γ1) pairs; Γ1 − Γ_other is linear in g_ref².
pub fn fit_g_ref(
    observations: &[(f64, f64)],
    base: &QubitResonatorParams,
    tip: &TipModel,
    d_ref: f64,
    gamma_other: f64,
) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::invalid("observations", "need at least one point"));
    }
    base.validate()?;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(d, gamma1) in observations {
        let ratio = cap_excess(d, tip)? / cap_excess(d_ref, tip)?;
        let x = ratio * ratio * base.kappa / (base.delta * base.delta);
        sxy += x * (gamma1 - gamma_other);
        sxx += x * x;
    }
    let g2 = sxy / sxx;
    if !(g2 > 0.0) {
        return Err(Error::NoSolution("observed rates do not exceed the distance-independent rate".into()));
    }
    Ok(g2.sqrt())
}
