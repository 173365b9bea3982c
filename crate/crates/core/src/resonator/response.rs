use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::quantities::CONSTANTS;
use crate::rng;

/// Everything needed to evaluate the reflection model.
///
/// `theta` is the impedance-mismatch asymmetry, `b_mag`/`b_phase` the complex
/// environment factor and `tau` the cable delay entering as `exp(i·tau·f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    pub f0: f64,
    pub qi: f64,
    pub qc: f64,
    pub theta: f64,
    pub b_mag: f64,
    pub b_phase: f64,
    pub tau: f64,
}

impl ResonatorParams {
    /// Ideal reflection: no environment attenuation, rotation or delay.
    pub fn ideal(f0: f64, qi: f64, qc: f64, theta: f64) -> Self {
        ResonatorParams { f0, qi, qc, theta, b_mag: 1.0, b_phase: 0.0, tau: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("f0", self.f0)?;
        ensure_positive("qi", self.qi)?;
        ensure_positive("qc", self.qc)?;
        ensure_positive("b_mag", self.b_mag)?;
        ensure_finite("b_phase", self.b_phase)?;
        ensure_finite("tau", self.tau)?;
        if !(self.theta.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(Error::invalid("theta", format!("|theta| must be < pi/2, got {}", self.theta)));
        }
        total_q(self).map(|_| ())
    }

    pub fn environment(&self) -> Complex64 {
        Complex64::from_polar(self.b_mag, self.b_phase)
    }
}

/// Loaded quality factor from 1/Q = 1/Qi + cos(theta)/Qc.
pub fn total_q(params: &ResonatorParams) -> Result<f64> {
    let inv = 1.0 / params.qi + params.theta.cos() / params.qc;
    let q = 1.0 / inv;
    if q.is_finite() && q > 0.0 {
        Ok(q)
    } else {
        Err(Error::invalid("total Q", format!("1/Q = {inv} does not give a positive finite Q")))
    }
}

pub(crate) fn s11_with_q(p: &ResonatorParams, q: f64, f: f64) -> Complex64 {
    let k = Complex64::from_polar(2.0 * q / p.qc, p.theta);
    let y = 2.0 * q * (f - p.f0) / p.f0;
    let resonant = Complex64::new(1.0, 0.0) - k / Complex64::new(1.0, y);
    p.environment() * Complex64::from_polar(1.0, p.tau * f) * resonant
}

/// Reflection coefficient at frequency `f` (Hz).
pub fn s11_model(params: &ResonatorParams, f: f64) -> Result<Complex64> {
    params.validate()?;
    ensure_finite("frequency", f)?;
    Ok(s11_with_q(params, total_q(params)?, f))
}

/// Mean intracavity photon number 2Q²P/(π·Qc·h·f0²) for an input power in W.
pub fn average_photon_number(q: f64, qc: f64, f0: f64, p_in: f64) -> Result<f64> {
    ensure_positive("q", q)?;
    ensure_positive("qc", qc)?;
    ensure_positive("f0", f0)?;
    ensure_positive("p_in", p_in)?;
    Ok(2.0 * q * q * p_in / (std::f64::consts::PI * qc * CONSTANTS.h * f0 * f0))
}

/// A frequency sweep of complex reflection samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexTrace {
    freqs: Vec<f64>,
    samples: Vec<Complex64>,
}

pub const MIN_TRACE_POINTS: usize = 8;

impl ComplexTrace {
    pub fn new(freqs: Vec<f64>, samples: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != samples.len() {
            return Err(Error::invalid("trace", format!("{} frequencies but {} samples", freqs.len(), samples.len())));
        }
        if freqs.len() < MIN_TRACE_POINTS {
            return Err(Error::invalid(
                "trace",
                format!("need at least {MIN_TRACE_POINTS} points, got {}", freqs.len()),
            ));
        }
        if freqs.iter().any(|f| !f.is_finite()) || samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::invalid("trace", "non-finite value"));
        }
        if let Some(i) = freqs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid("trace", format!("frequencies must be strictly increasing (index {})", i + 1)));
        }
        Ok(ComplexTrace { freqs, samples })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.freqs[self.freqs.len() - 1] - self.freqs[0]
    }

    /// Multiplies every sample by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        ComplexTrace { freqs: self.freqs.clone(), samples: self.samples.iter().map(|s| s * c).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation per quadrature.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec { sigma: 0.0, seed: 0 }
    }
}

/// Evaluates the model on `freqs` and adds i.i.d. complex Gaussian noise.
pub fn synthesize_trace(params: &ResonatorParams, freqs: &[f64], noise: &NoiseSpec) -> Result<ComplexTrace> {
    if freqs.is_empty() {
        return Err(Error::invalid("frequency grid", "empty"));
    }
    params.validate()?;
    if !(noise.sigma >= 0.0) || !noise.sigma.is_finite() {
        return Err(Error::invalid("sigma", format!("must be >= 0, got {}", noise.sigma)));
    }
    let q = total_q(params)?;
    let mut rng = rng::stream(noise.seed, 0);
    let samples = freqs
        .iter()
        .map(|&f| {
            let clean = s11_with_q(params, q, f);
            if noise.sigma == 0.0 {
                clean
            } else {
                let re = rng::gaussian(&mut rng, noise.sigma);
                let im = rng::gaussian(&mut rng, noise.sigma);
                clean + Complex64::new(re, im)
            }
        })
        .collect();
    ComplexTrace::new(freqs.to_vec(), samples)
}

/// Uniform grid of `n` points centred on `f0` spanning `linewidths` loaded linewidths.
pub fn linewidth_grid(params: &ResonatorParams, linewidths: f64, n: usize) -> Result<Vec<f64>> {
    let q = total_q(params)?;
    let span = linewidths * params.f0 / q;
    if n < 2 {
        return Err(Error::invalid("n", "need at least two grid points"));
    }
    Ok((0..n).map(|i| params.f0 - 0.5 * span + span * i as f64 / (n - 1) as f64).collect())
}
