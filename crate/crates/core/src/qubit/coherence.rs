use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::lm::{self, LmConfig, Problem};
use crate::quantities::Estimate;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    T1,
    Ramsey,
    Echo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceTrace {
    pub kind: Experiment,
    /// Delays, s.
    pub delays: Vec<f64>,
    /// Excited-state population estimate.
    pub signal: Vec<f64>,
}

impl CoherenceTrace {
    pub fn new(kind: Experiment, delays: Vec<f64>, signal: Vec<f64>) -> Result<Self> {
        if delays.len() != signal.len() {
            return Err(Error::invalid("trace", "delays and signal differ in length"));
        }
        if delays.iter().chain(&signal).any(|v| !v.is_finite()) {
            return Err(Error::invalid("trace", "non-finite values"));
        }
        if delays.windows(2).any(|w| w[1] <= w[0]) || delays.first().is_some_and(|d| *d < 0.0) {
            return Err(Error::invalid("delays", "must be non-negative and strictly increasing"));
        }
        Ok(CoherenceTrace { kind, delays, signal })
    }
}

/// Ground-truth decay for the generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayTruth {
    /// T1, T2R or T2E, s.
    pub time_constant: f64,
    /// Ramsey detuning, Hz.
    pub detuning: f64,
}

/// Quasi-static Gaussian detuning noise, averaged over `realizations` shots.
/// Refocused by the echo sequence; broadens Ramsey fringes only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiStatic {
    /// RMS detuning, Hz.
    pub sigma: f64,
    pub realizations: usize,
}

pub fn simulate_decay(
    kind: Experiment,
    truth: &DecayTruth,
    delays: &[f64],
    noise: f64,
    seed: u64,
    quasi_static: Option<QuasiStatic>,
) -> Result<CoherenceTrace> {
    ensure_positive("time_constant", truth.time_constant)?;
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid("noise", "must be finite and >= 0"));
    }
    let tau = truth.time_constant;
    let two_pi = 2.0 * std::f64::consts::PI;
    let offsets: Vec<f64> = match (kind, quasi_static) {
        (Experiment::Ramsey, Some(q)) if q.sigma > 0.0 && q.realizations > 0 => {
            let mut r = rng::stream(seed, 1);
            (0..q.realizations).map(|_| rng::gaussian(&mut r, q.sigma)).collect()
        }
        _ => vec![0.0],
    };
    let mut readout = rng::stream(seed, 0);
    let signal: Vec<f64> = delays
        .iter()
        .map(|&t| {
            let envelope = (-t / tau).exp();
            let clean = match kind {
                Experiment::T1 => envelope,
                Experiment::Echo => 0.5 + 0.5 * envelope,
                Experiment::Ramsey => {
                    let fringe = offsets.iter().map(|o| (two_pi * (truth.detuning + o) * t).cos()).sum::<f64>()
                        / offsets.len() as f64;
                    0.5 + 0.5 * fringe * envelope
                }
            };
            clean + if noise > 0.0 { rng::gaussian(&mut readout, noise) } else { 0.0 }
        })
        .collect();
    CoherenceTrace::new(kind, delays.to_vec(), signal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub kind: Experiment,
    pub time_constant: Estimate,
    /// Ramsey fringe frequency, Hz; absent for T1 and echo.
    pub detuning: Option<Estimate>,
    pub amplitude: Estimate,
    pub offset: Estimate,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The delays cover less than 1.5 fitted time constants.
    pub undersampled: bool,
}

pub const MIN_DECAY_POINTS: usize = 8;

/// Decay shape without amplitude and offset.
fn shape(kind: Experiment, t: f64, tau: f64, detuning: f64) -> f64 {
    let e = (-t / tau).exp();
    match kind {
        Experiment::Ramsey => (2.0 * std::f64::consts::PI * detuning * t).cos() * e,
        _ => e,
    }
}

struct DecayProblem<'a> {
    trace: &'a CoherenceTrace,
}

impl Problem for DecayProblem<'_> {
    fn n_params(&self) -> usize {
        if self.trace.kind == Experiment::Ramsey {
            4
        } else {
            3
        }
    }
    fn n_residuals(&self) -> usize {
        self.trace.delays.len()
    }
    // x = [A, c, ln τ, detuning]
    fn residuals(&self, x: &[f64]) -> DVector<f64> {
        let (tau, det) = (x[2].exp(), x.get(3).copied().unwrap_or(0.0));
        DVector::from_iterator(
            self.trace.delays.len(),
            self.trace
                .delays
                .iter()
                .zip(&self.trace.signal)
                .map(|(&t, y)| x[0] * shape(self.trace.kind, t, tau, det) + x[1] - y),
        )
    }
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (tau, det) = (x[2].exp(), x.get(3).copied().unwrap_or(0.0));
        let two_pi = 2.0 * std::f64::consts::PI;
        DMatrix::from_fn(self.trace.delays.len(), self.n_params(), |i, j| {
            let t = self.trace.delays[i];
            let s = shape(self.trace.kind, t, tau, det);
            match j {
                0 => s,
                1 => 1.0,
                2 => x[0] * s * t / tau,
                _ => -x[0] * two_pi * t * (two_pi * det * t).sin() * (-t / tau).exp(),
            }
        })
    }
}

/// Ordinary least squares for y ≈ A·s + c. Returns (A, c, ssr).
fn affine_fit(s: impl Iterator<Item = f64>, y: &[f64], syy: f64) -> Option<(f64, f64, f64)> {
    let n = y.len() as f64;
    let (mut ss, mut sss, mut ssy) = (0.0, 0.0, 0.0);
    for (v, w) in s.zip(y) {
        ss += v;
        sss += v * v;
        ssy += v * w;
    }
    let sy: f64 = y.iter().sum();
    let det = n * sss - ss * ss;
    if !(det > 1e-12 * n * sss) {
        return None;
    }
    let a = (n * ssy - ss * sy) / det;
    let c = (sy - a * ss) / n;
    Some((a, c, (syy - a * ssy - c * sy).max(0.0)))
}

/// Grid search over (τ[, detuning]) with closed-form amplitude and offset, then Levenberg-Marquardt.
pub fn fit_decay(trace: &CoherenceTrace) -> Result<DecayFit> {
    let n = trace.delays.len();
    if n < MIN_DECAY_POINTS {
        return Err(Error::invalid("trace", format!("need >= {MIN_DECAY_POINTS} points, got {n}")));
    }
    let t_max = trace.delays[n - 1];
    let dt_min = trace.delays.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let tau_grid: Vec<f64> = (0..80).map(|k| dt_min * (20.0 * t_max / dt_min).powf(k as f64 / 79.0)).collect();
    let detunings: Vec<f64> = if trace.kind == Experiment::Ramsey {
        let step = 0.25 / t_max;
        let count = ((0.5 / dt_min) / step).ceil() as usize;
        (0..=count).map(|k| k as f64 * step).collect()
    } else {
        vec![0.0]
    };

    let envelopes: Vec<Vec<f64>> =
        tau_grid.iter().map(|&tau| trace.delays.iter().map(|&t| (-t / tau).exp()).collect()).collect();
    let syy: f64 = trace.signal.iter().map(|y| y * y).sum();
    let mut best: Option<(f64, f64, f64, f64, f64)> = None;
    for &det in &detunings {
        let fringe: Vec<f64> = trace.delays.iter().map(|&t| shape(trace.kind, t, f64::INFINITY, det)).collect();
        for (&tau, env) in tau_grid.iter().zip(&envelopes) {
            let s = fringe.iter().zip(env).map(|(f, e)| f * e);
            if let Some((a, c, ssr)) = affine_fit(s, &trace.signal, syy) {
                if best.is_none_or(|b| ssr < b.4) {
                    best = Some((a, c, tau, det, ssr));
                }
            }
        }
    }
    let (a, c, tau, det, _) = best.ok_or_else(|| Error::NoSolution("no decay shape fits the trace".into()))?;
    let mut start = vec![a, c, tau.ln()];
    if trace.kind == Experiment::Ramsey {
        start.push(det);
    }
    let problem = DecayProblem { trace };
    let out = lm::minimize(&problem, &start, &LmConfig::default())?;
    let sd = out.stderr();
    let tau = out.params[2].exp();
    Ok(DecayFit {
        kind: trace.kind,
        time_constant: Estimate { value: tau, stderr: tau * sd[2] },
        detuning: (trace.kind == Experiment::Ramsey).then(|| Estimate { value: out.params[3].abs(), stderr: sd[3] }),
        amplitude: Estimate { value: out.params[0], stderr: sd[0] },
        offset: Estimate { value: out.params[1], stderr: sd[1] },
        residual_rms: (out.ssr / n as f64).sqrt(),
        iterations: out.iterations,
        converged: out.converged,
        undersampled: t_max < 1.5 * tau,
    })
}
