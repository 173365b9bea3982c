//! Reflection response of the probe resonator and its extraction from data.

mod circle;
mod fit;
mod response;

pub use circle::{circle_fit, fit_points, Circle};
pub use fit::{
    delay_free_phase, estimate_delay, fit_s11, initial_guess, phase_slope_at_resonance, FitBounds, FitConfig,
    FitResult, ParamStderr,
};
pub use response::{
    average_photon_number, linewidth_grid, s11_model, synthesize_trace, total_q, ComplexTrace, NoiseSpec,
    ResonatorParams, MIN_TRACE_POINTS,
};

/// Removes 2π jumps between consecutive samples.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let d = p - phase[i - 1];
            offset -= two_pi * (d / two_pi).round();
        }
        out.push(p + offset);
    }
    out
}
