use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::circle::fit_points;
use super::response::{s11_with_q, total_q, ComplexTrace, ResonatorParams};
use super::unwrap_phase;
use crate::error::{Error, Result};
use crate::lm::{self, LmConfig, Problem};

/// Box constraints on the physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBounds {
    pub qi: (f64, f64),
    pub qc: (f64, f64),
    pub theta: (f64, f64),
}

impl Default for FitBounds {
    fn default() -> Self {
        let edge = std::f64::consts::FRAC_PI_2 - 1e-6;
        FitBounds { qi: (1.0, 1e12), qc: (1.0, 1e12), theta: (-edge, edge) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub damping_init: f64,
    pub bounds: FitBounds,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { max_iter: 200, rel_tol: 1e-10, damping_init: 1e-3, bounds: FitBounds::default() }
    }
}

/// One-sigma uncertainties, in the same units as [`ResonatorParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamStderr {
    pub f0: f64,
    pub qi: f64,
    pub qc: f64,
    pub theta: f64,
    pub b_mag: f64,
    pub b_phase: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ResonatorParams,
    /// sqrt(Σ|model − data|² / N)
    pub residual_rms: f64,
    /// Same metric evaluated at the starting point.
    pub initial_residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stderr: ParamStderr,
}

/// Cable delay from the off-resonant phase, refined on circle geometry.
///
/// A common slope with separate intercepts is regressed on the unwrapped phase
/// of the outer 20% of points on each side, so any 2π winding through the
/// resonance does not bias it. The estimate is then polished by minimising
/// the radial scatter of the delay-corrected samples about their best-fit
/// circle, which is exactly zero at the true delay for noiseless data.
pub fn estimate_delay(trace: &ComplexTrace) -> Result<f64> {
    let tau0 = wing_phase_slope(trace)?;
    let span = trace.span();
    let f_start = trace.freqs()[0];
    let cost = |tau: f64| -> f64 {
        let pts: Vec<Complex64> = trace
            .freqs()
            .iter()
            .zip(trace.samples())
            .map(|(f, s)| s * Complex64::from_polar(1.0, -tau * (f - f_start)))
            .collect();
        match fit_points(&pts) {
            Ok(c) => c.rms_deviation(&pts),
            Err(_) => f64::INFINITY,
        }
    };

    // Coarse scan over ±2 rad of accumulated phase, then golden section. A
    // small circle far from the origin needs proportionally finer steps.
    let mags: Vec<f64> = trace.samples().iter().map(|s| s.norm()).collect();
    let top = mags.iter().cloned().fold(0.0, f64::max);
    let depth = (top - mags.iter().cloned().fold(f64::INFINITY, f64::min)) / top;
    let half_width = 2.0 / span;
    let steps = (40.0 / depth.clamp(0.01, 1.0)).ceil() as usize;
    let h = 2.0 * half_width / steps as f64;
    let (best_i, _) = (0..=steps)
        .map(|i| (i, cost(tau0 - half_width + h * i as f64)))
        .fold((0, f64::INFINITY), |acc, (i, c)| if c < acc.1 { (i, c) } else { acc });
    let centre = tau0 - half_width + h * best_i as f64;
    let refined = golden_section(cost, centre - h, centre + h, 1e-10 / span);
    if cost(refined) <= cost(tau0) {
        Ok(refined)
    } else {
        Ok(tau0)
    }
}

fn wing_phase_slope(trace: &ComplexTrace) -> Result<f64> {
    let n = trace.len();
    let k = n / 5;
    if 2 * k < 4 {
        return Err(Error::invalid("trace", format!("only {} wing points, need >= 4", 2 * k)));
    }
    let phase = unwrap_phase(&trace.samples().iter().map(|s| s.arg()).collect::<Vec<_>>());
    let f = trace.freqs();
    let mean = |idx: &[usize], v: &dyn Fn(usize) -> f64| idx.iter().map(|&i| v(i)).sum::<f64>() / idx.len() as f64;
    let left: Vec<usize> = (0..k).collect();
    let right: Vec<usize> = (n - k..n).collect();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for side in [&left, &right] {
        let fm = mean(side, &|i| f[i]);
        let pm = mean(side, &|i| phase[i]);
        for &i in side.iter() {
            sxy += (f[i] - fm) * (phase[i] - pm);
            sxx += (f[i] - fm).powi(2);
        }
    }
    Ok(sxy / sxx)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() < tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Staged starting point: delay, circle, phase response, then circle geometry.
pub fn initial_guess(trace: &ComplexTrace) -> Result<ResonatorParams> {
    let tau = estimate_delay(trace)?;
    let f = trace.freqs();
    let z: Vec<Complex64> =
        f.iter().zip(trace.samples()).map(|(f, s)| s * Complex64::from_polar(1.0, -tau * f)).collect();
    let circle = fit_points(&z)?;

    let angle = unwrap_phase(&z.iter().map(|p| (p - circle.center).arg()).collect::<Vec<_>>());
    let swing =
        angle.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - angle.iter().cloned().fold(f64::INFINITY, f64::min);
    if swing < std::f64::consts::FRAC_PI_2 {
        return Err(Error::Degenerate(format!("no resonance found (phase swing {swing:.3} rad)")));
    }

    // Steepest point of the phase response.
    let mut steepest = 1;
    let mut best = 0.0;
    for i in 1..f.len() - 1 {
        let slope = ((angle[i + 1] - angle[i - 1]) / (f[i + 1] - f[i - 1])).abs();
        if slope > best {
            best = slope;
            steepest = i;
        }
    }
    let f0_guess = f[steepest];
    let q_guess = phase_width_q(f, &angle, steepest).unwrap_or(f0_guess / (0.1 * trace.span()));
    let (f0, q, phase_at_f0) = refine_phase_response(f, &angle, f0_guess, q_guess, angle[steepest])?;

    let df = trace.span() / (f.len() - 1) as f64;
    let linewidth = f0 / q;
    if !(linewidth > 0.5 * df && linewidth < 2.0 * trace.span()) {
        return Err(Error::Degenerate(format!("implausible linewidth {linewidth:.3e} Hz")));
    }

    // The off-resonant point lies diametrically opposite the on-resonance sample.
    let b = circle.center - Complex64::from_polar(circle.radius, phase_at_f0);
    let scaled = Complex64::new(1.0, 0.0) - circle.center / b;
    let ratio = scaled.norm();
    let theta = scaled.arg().clamp(-1.5, 1.5);
    let qc = q / ratio;
    let inv_qi = 1.0 / q - theta.cos() / qc;
    let qi = if inv_qi > 0.0 { 1.0 / inv_qi } else { 10.0 * q };

    Ok(ResonatorParams { f0, qi, qc, theta, b_mag: b.norm(), b_phase: b.arg(), tau })
}

/// Q from the frequencies where the phase has moved ±π/2 from its value at `centre`.
fn phase_width_q(f: &[f64], angle: &[f64], centre: usize) -> Option<f64> {
    let target_hi = angle[centre] + std::f64::consts::FRAC_PI_2;
    let target_lo = angle[centre] - std::f64::consts::FRAC_PI_2;
    let crossing = |target: f64, forward: bool| -> Option<f64> {
        let idx: Box<dyn Iterator<Item = usize>> =
            if forward { Box::new(centre..f.len() - 1) } else { Box::new((0..centre).rev()) };
        for i in idx {
            let (a, b) = if forward { (i, i + 1) } else { (i + 1, i) };
            let (va, vb) = (angle[a] - target, angle[b] - target);
            if va == 0.0 {
                return Some(f[a]);
            }
            if va.signum() != vb.signum() {
                return Some(f[a] + (f[b] - f[a]) * va / (va - vb));
            }
        }
        None
    };
    // The phase falls through resonance, so +π/2 lies below f0.
    let below = crossing(target_hi, false).or_else(|| crossing(target_lo, false))?;
    let above = crossing(target_lo, true).or_else(|| crossing(target_hi, true))?;
    let width = above - below;
    (width > 0.0).then(|| f[centre] / width)
}

/// Fits φ(f) = φ0 − 2·atan(2Q(f − f0)/f0) to the angle about the circle centre.
fn refine_phase_response(f: &[f64], angle: &[f64], f0: f64, q: f64, phi0: f64) -> Result<(f64, f64, f64)> {
    struct PhaseModel<'a> {
        f: &'a [f64],
        angle: &'a [f64],
        f_ref: f64,
        scale: f64,
    }
    impl PhaseModel<'_> {
        fn unpack(&self, p: &[f64]) -> (f64, f64, f64) {
            (self.f_ref + self.scale * p[0], p[1].exp(), p[2])
        }
    }
    impl Problem for PhaseModel<'_> {
        fn n_params(&self) -> usize {
            3
        }
        fn n_residuals(&self) -> usize {
            self.f.len()
        }
        fn residuals(&self, p: &[f64]) -> DVector<f64> {
            let (f0, q, phi) = self.unpack(p);
            DVector::from_iterator(
                self.f.len(),
                self.f.iter().zip(self.angle).map(|(f, a)| phi - 2.0 * (2.0 * q * (f - f0) / f0).atan() - a),
            )
        }
        fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
            let (f0, q, _) = self.unpack(p);
            DMatrix::from_fn(self.f.len(), 3, |i, j| {
                let u = 2.0 * q * (self.f[i] - f0) / f0;
                let w = -2.0 / (1.0 + u * u);
                match j {
                    0 => w * (-2.0 * q * self.f[i] / (f0 * f0)) * self.scale,
                    1 => w * u,
                    _ => 1.0,
                }
            })
        }
    }
    let f_ref = f0;
    let scale = f[f.len() - 1] - f[0];
    let model = PhaseModel { f, angle, f_ref, scale };
    let out = lm::minimize(&model, &[0.0, q.ln(), phi0], &LmConfig { max_iter: 100, ..LmConfig::default() })
        .map_err(|_| Error::Degenerate("phase response fit failed".into()))?;
    let (f0, q, phi) = model.unpack(&out.params);
    if !(q.is_finite() && q > 0.0 && f0.is_finite()) {
        return Err(Error::Degenerate("phase response fit diverged".into()));
    }
    Ok((f0, q, phi))
}

/// Internal parameterization:
/// `[(f0 − f_ref)/span, ln Qi, ln Qc, θ, ln|B|, phase at f_ref, τ·span]`.
struct S11Problem<'a> {
    trace: &'a ComplexTrace,
    f_ref: f64,
    span: f64,
    bounds: FitBounds,
}

impl S11Problem<'_> {
    fn pack(&self, p: &ResonatorParams) -> Vec<f64> {
        vec![
            (p.f0 - self.f_ref) / self.span,
            p.qi.ln(),
            p.qc.ln(),
            p.theta,
            p.b_mag.ln(),
            p.b_phase + p.tau * self.f_ref,
            p.tau * self.span,
        ]
    }

    fn unpack(&self, x: &[f64]) -> ResonatorParams {
        let tau = x[6] / self.span;
        ResonatorParams {
            f0: self.f_ref + self.span * x[0],
            qi: x[1].exp(),
            qc: x[2].exp(),
            theta: x[3],
            b_mag: x[4].exp(),
            b_phase: wrap_phase(x[5] - tau * self.f_ref),
            tau,
        }
    }

    /// d(external)/d(internal), rows in `ParamStderr` field order.
    fn transform(&self, x: &[f64]) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(7, 7);
        t[(0, 0)] = self.span;
        t[(1, 1)] = x[1].exp();
        t[(2, 2)] = x[2].exp();
        t[(3, 3)] = 1.0;
        t[(4, 4)] = x[4].exp();
        t[(5, 5)] = 1.0;
        t[(5, 6)] = -self.f_ref / self.span;
        t[(6, 6)] = 1.0 / self.span;
        t
    }

    fn model_at(&self, x: &[f64], f: f64) -> Complex64 {
        let (b_mag, phase, tau) = (x[4].exp(), x[5], x[6] / self.span);
        let f0 = self.f_ref + self.span * x[0];
        let (qi, qc, theta) = (x[1].exp(), x[2].exp(), x[3]);
        let q = 1.0 / (1.0 / qi + theta.cos() / qc);
        let k = Complex64::from_polar(2.0 * q / qc, theta);
        let y = 2.0 * q * (f - f0) / f0;
        Complex64::from_polar(b_mag, phase + tau * (f - self.f_ref)) * (1.0 - k / Complex64::new(1.0, y))
    }
}

impl Problem for S11Problem<'_> {
    fn n_params(&self) -> usize {
        7
    }

    fn n_residuals(&self) -> usize {
        2 * self.trace.len()
    }

    fn residuals(&self, x: &[f64]) -> DVector<f64> {
        let mut r = DVector::zeros(2 * self.trace.len());
        for (i, (f, s)) in self.trace.freqs().iter().zip(self.trace.samples()).enumerate() {
            let d = self.model_at(x, *f) - s;
            r[2 * i] = d.re;
            r[2 * i + 1] = d.im;
        }
        r
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.trace.len();
        let mut jac = DMatrix::zeros(2 * n, 7);
        let f0 = self.f_ref + self.span * x[0];
        let (qi, qc, theta) = (x[1].exp(), x[2].exp(), x[3]);
        let q = 1.0 / (1.0 / qi + theta.cos() / qc);
        let rot = Complex64::from_polar(1.0, theta);
        let k = rot * (2.0 * q / qc);
        let dq_dlnqi = q * q / qi;
        let dq_dlnqc = q * q * theta.cos() / qc;
        let dq_dtheta = q * q * theta.sin() / qc;
        let dk_dlnqi = rot * (2.0 * dq_dlnqi / qc);
        let dk_dlnqc = rot * (2.0 * dq_dlnqc / qc) - k;
        let dk_dtheta = rot * (2.0 * dq_dtheta / qc) + Complex64::i() * k;
        let i = Complex64::i();
        for (row, f) in self.trace.freqs().iter().enumerate() {
            let f = *f;
            let env = Complex64::from_polar(x[4].exp(), x[5] + x[6] / self.span * (f - self.f_ref));
            let y = 2.0 * q * (f - f0) / f0;
            let denom = Complex64::new(1.0, y);
            let r = 1.0 - k / denom;
            let s = env * r;
            let dr_dy = i * k / (denom * denom);
            let dy_dq = 2.0 * (f - f0) / f0;
            let dr = |dk: Complex64, dq: f64| -dk / denom + dr_dy * dy_dq * dq;
            let cols = [
                env * dr_dy * (-2.0 * q * f / (f0 * f0)) * self.span,
                env * dr(dk_dlnqi, dq_dlnqi),
                env * dr(dk_dlnqc, dq_dlnqc),
                env * dr(dk_dtheta, dq_dtheta),
                s,
                i * s,
                i * s * ((f - self.f_ref) / self.span),
            ];
            for (c, v) in cols.iter().enumerate() {
                jac[(2 * row, c)] = v.re;
                jac[(2 * row + 1, c)] = v.im;
            }
        }
        jac
    }

    fn project(&self, x: &mut [f64]) {
        x[1] = x[1].clamp(self.bounds.qi.0.ln(), self.bounds.qi.1.ln());
        x[2] = x[2].clamp(self.bounds.qc.0.ln(), self.bounds.qc.1.ln());
        x[3] = x[3].clamp(self.bounds.theta.0, self.bounds.theta.1);
    }
}

fn wrap_phase(phi: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = phi - two_pi * (phi / two_pi).round();
    if w <= -std::f64::consts::PI {
        w + two_pi
    } else {
        w
    }
}

/// Levenberg-Marquardt fit of all seven reflection parameters.
///
/// Non-convergence is reported through `converged = false` with the best
/// parameters found; only malformed input or singular normal equations are
/// errors.
pub fn fit_s11(trace: &ComplexTrace, config: &FitConfig, init: Option<ResonatorParams>) -> Result<FitResult> {
    let start = match init {
        Some(p) => {
            p.validate()?;
            p
        }
        None => initial_guess(trace)?,
    };
    let freqs = trace.freqs();
    let problem = S11Problem {
        trace,
        f_ref: 0.5 * (freqs[0] + freqs[freqs.len() - 1]),
        span: trace.span(),
        bounds: config.bounds,
    };
    let lm_config = LmConfig { max_iter: config.max_iter, rel_tol: config.rel_tol, damping_init: config.damping_init };
    let out = lm::minimize(&problem, &problem.pack(&start), &lm_config)?;
    let params = problem.unpack(&out.params);
    total_q(&params)?;

    let t = problem.transform(&out.params);
    let cov = &t * &out.covariance * t.transpose();
    let sd = |i: usize| cov[(i, i)].max(0.0).sqrt();
    let n = trace.len() as f64;
    Ok(FitResult {
        params,
        residual_rms: (out.ssr / n).sqrt(),
        initial_residual_rms: (out.initial_ssr / n).sqrt(),
        iterations: out.iterations,
        converged: out.converged,
        stderr: ParamStderr { f0: sd(0), qi: sd(1), qc: sd(2), theta: sd(3), b_mag: sd(4), b_phase: sd(5), tau: sd(6) },
    })
}

/// d arg(S11)/df at f0 with the delay term removed, in rad/Hz.
///
/// Equals 2Q/f0 · Re[K/(1 − K)] with K = 2(Q/Qc)·e^{iθ}. Diverges at exact
/// critical coupling, where the on-resonance response passes through zero.
pub fn phase_slope_at_resonance(params: &ResonatorParams) -> Result<f64> {
    params.validate()?;
    let q = total_q(params)?;
    let k = Complex64::from_polar(2.0 * q / params.qc, params.theta);
    Ok(2.0 * q / params.f0 * (k / (1.0 - k)).re)
}

/// arg S11 with the delay removed; used to cross-check the analytic slope.
pub fn delay_free_phase(params: &ResonatorParams, f: f64) -> Result<f64> {
    params.validate()?;
    let q = total_q(params)?;
    let p = ResonatorParams { tau: 0.0, ..*params };
    Ok(s11_with_q(&p, q, f).arg())
}
