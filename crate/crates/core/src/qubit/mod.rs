//! Transmon spectrum, coupling to the scanning resonator, coherence experiments
//! and two-tone spectroscopy.

mod coherence;
mod coupling;
mod transmon;
mod two_tone;

pub use coherence::{
    fit_decay, simulate_decay, CoherenceTrace, DecayFit, DecayTruth, Experiment, QuasiStatic, MIN_DECAY_POINTS,
};
pub use coupling::{
    coupling_vs_distance, dispersive_shift, fit_g_ref, gamma1_vs_distance, purcell_rate, CouplingModel,
    QubitResonatorParams,
};
pub use transmon::{
    invert_spectrum, transitions, transmon_levels, Inversion, Regime, Transitions, TransmonParams, CONVERGENCE_STEP,
    CONVERGENCE_TOL_HZ, TRANSMON_RATIO,
};
pub use two_tone::{power_broadened_width, two_tone_spectrum, TwoToneConfig, TwoToneMap};
