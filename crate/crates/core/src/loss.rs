//! Two-level-system and quasiparticle loss, their frequency shifts, and
//! extraction of loss parameters from internal-Q sweeps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::lm::{self, LmConfig, Problem};
use crate::quantities::{Estimate, CONSTANTS};
use crate::special::{bessel_k0_scaled, re_digamma_half_plus_imag};

/// Ratio of the superconducting gap to k_B·Tc in the BCS limit.
pub const GAP_RATIO: f64 = 1.76;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsParams {
    /// Low-power, low-temperature TLS loss tangent.
    pub delta0: f64,
    /// Critical saturation power in W.
    pub pc_watts: f64,
}

impl TlsParams {
    pub fn new(delta0: f64, pc_watts: f64) -> Result<Self> {
        ensure_positive("delta0", delta0)?;
        ensure_positive("pc_watts", pc_watts)?;
        Ok(TlsParams { delta0, pc_watts })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpParams {
    /// Critical temperature in K.
    pub tc: f64,
    /// Kinetic inductance fraction.
    pub alpha_k: f64,
}

impl QpParams {
    pub fn new(tc: f64, alpha_k: f64) -> Result<Self> {
        ensure_positive("tc", tc)?;
        if !(alpha_k > 0.0 && alpha_k <= 1.0) {
            return Err(Error::invalid("alpha_k", format!("must lie in (0, 1], got {alpha_k}")));
        }
        Ok(QpParams { tc, alpha_k })
    }

    pub fn with_tc(tc: f64) -> Result<Self> {
        Self::new(tc, 1.0)
    }

    /// Superconducting gap Δ0 in J.
    pub fn gap(&self) -> f64 {
        GAP_RATIO * CONSTANTS.kb * self.tc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeLossParams {
    pub tls: TlsParams,
    pub qp: QpParams,
    /// Residual Q when every TLS is saturated.
    pub q_sat: f64,
    /// Residual Q from all other channels in a temperature sweep.
    pub q_other: f64,
}

/// Which quasiparticle loss expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpForm {
    /// α_k·(4/π)·e^{−Δ0/kT}·sinh(ξ)·K0(ξ); vanishes as T → 0.
    #[default]
    Physical,
    /// (π/4)·e^{Δ0/kT}/(sinh(ξ)·K0(ξ)); diverges as T → 0. Kept for comparison only.
    Printed,
}

/// ħω/(2 k_B T)
fn xi(omega: f64, t: f64) -> f64 {
    CONSTANTS.hbar * omega / (2.0 * CONSTANTS.kb * t)
}

/// Thermal TLS polarization factor tanh(ħω/2kT).
fn tls_thermal(omega: f64, t: f64) -> f64 {
    xi(omega, t).tanh()
}

fn check_positive(omega: f64, t: f64) -> Result<()> {
    ensure_positive("omega", omega)?;
    ensure_positive("temperature", t)
}

pub fn tls_loss(tls: &TlsParams, omega: f64, t: f64, p_in: f64) -> Result<f64> {
    check_positive(omega, t)?;
    if !(p_in >= 0.0) || !p_in.is_finite() {
        return Err(Error::invalid("p_in", format!("must be finite and >= 0, got {p_in}")));
    }
    Ok(tls.delta0 * tls_thermal(omega, t) / (1.0 + p_in / tls.pc_watts).sqrt())
}

pub fn qi_power_model(p_in: f64, q_sat: f64, tls: &TlsParams, omega: f64, t: f64) -> Result<f64> {
    ensure_positive("q_sat", q_sat)?;
    Ok(1.0 / (1.0 / q_sat + tls_loss(tls, omega, t, p_in)?))
}

pub fn qp_loss(qp: &QpParams, omega: f64, t: f64) -> Result<f64> {
    qp_loss_with_form(qp, omega, t, QpForm::Physical)
}

pub fn qp_loss_with_form(qp: &QpParams, omega: f64, t: f64, form: QpForm) -> Result<f64> {
    check_positive(omega, t)?;
    if t >= qp.tc {
        return Err(Error::invalid("temperature", format!("{t} K is not below Tc = {} K", qp.tc)));
    }
    let x = xi(omega, t);
    // sinh(x)·K0(x) = (1 − e^{−2x})/2 · e^x K0(x)
    let sinh_k0 = 0.5 * (-(-2.0 * x).exp_m1()) * bessel_k0_scaled(x)?;
    let activation = qp.gap() / (CONSTANTS.kb * t);
    Ok(match form {
        QpForm::Physical => qp.alpha_k * 4.0 / std::f64::consts::PI * (-activation).exp() * sinh_k0,
        QpForm::Printed => std::f64::consts::FRAC_PI_4 * activation.exp() / sinh_k0,
    })
}

/// Loss from each channel at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub other: f64,
    pub tls: f64,
    pub qp: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.other + self.tls + self.qp
    }
}

pub fn loss_breakdown(t: f64, params: &CompositeLossParams, omega: f64, p_in: f64) -> Result<LossBreakdown> {
    ensure_positive("q_other", params.q_other)?;
    Ok(LossBreakdown {
        other: 1.0 / params.q_other,
        tls: tls_loss(&params.tls, omega, t, p_in)?,
        qp: qp_loss(&params.qp, omega, t)?,
    })
}

pub fn qi_temperature_model(t: f64, params: &CompositeLossParams, omega: f64, p_in: f64) -> Result<f64> {
    Ok(1.0 / loss_breakdown(t, params, omega, p_in)?.total())
}

/// Fractional frequency shift from thermally broken Cooper pairs.
pub fn qp_frequency_shift(qp: &QpParams, t: f64) -> Result<f64> {
    ensure_positive("temperature", t)?;
    Ok(0.5 * qp.alpha_k * ((qp.gap() / (2.0 * CONSTANTS.kb * t)).tanh() - 1.0))
}

/// Fractional frequency shift from the TLS bath.
pub fn tls_frequency_shift(delta0: f64, omega: f64, t: f64) -> Result<f64> {
    check_positive(omega, t)?;
    let y = CONSTANTS.hbar * omega / (2.0 * std::f64::consts::PI * CONSTANTS.kb * t);
    Ok(delta0 / std::f64::consts::PI * (re_digamma_half_plus_imag(y) - y.ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSweepFit {
    pub delta0: Estimate,
    pub pc_watts: Estimate,
    pub q_sat: Estimate,
    /// RMS of the 1/Qi residuals.
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSweepFit {
    pub delta0: Estimate,
    pub q_other: Estimate,
    pub tc: Estimate,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when Tc is not constrained by the data (relative stderr above 50%).
    pub tc_unconstrained: bool,
}

/// Minimum points for a power sweep.
pub const MIN_POWER_POINTS: usize = 5;
/// Minimum points for a temperature sweep.
pub const MIN_TEMPERATURE_POINTS: usize = 6;

fn validate_sweep(data: &[(f64, f64)], min_points: usize, what: &'static str) -> Result<()> {
    if data.len() < min_points {
        return Err(Error::invalid(what, format!("need >= {min_points} points, got {}", data.len())));
    }
    for &(x, qi) in data {
        if !(x > 0.0 && x.is_finite() && qi > 0.0 && qi.is_finite()) {
            return Err(Error::invalid(what, format!("non-positive or non-finite point ({x}, {qi})")));
        }
    }
    Ok(())
}

/// Least squares for y ≈ a + b·g with a, b > 0. Returns (a, b, ssr).
fn positive_affine_fit(g: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = g.len() as f64;
    let (sg, sy) = (g.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sgg: f64 = g.iter().map(|v| v * v).sum();
    let sgy: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sgg - sg * sg;
    let ssr = |a: f64, b: f64| g.iter().zip(y).map(|(g, y)| (a + b * g - y).powi(2)).sum::<f64>();
    if det > 0.0 {
        let b = (n * sgy - sg * sy) / det;
        let a = (sy - b * sg) / n;
        if a > 0.0 && b > 0.0 {
            return Some((a, b, ssr(a, b)));
        }
    }
    // Boundary: keep the better single-term fit, nudging the other term off zero.
    let mean = sy / n;
    let only_b = if sgg > 0.0 { sgy / sgg } else { 0.0 };
    let mut best: Option<(f64, f64, f64)> = None;
    for (a, b) in [(mean, mean * 1e-3 / (sg / n).max(f64::MIN_POSITIVE)), (only_b.abs() * 1e-3 * sg / n, only_b)] {
        if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
            let s = ssr(a, b);
            if best.is_none_or(|(_, _, bs)| s < bs) {
                best = Some((a, b, s));
            }
        }
    }
    best
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

/// Loss-space residuals, scaled by the mean measured loss.
struct PowerProblem {
    power: Vec<f64>,
    loss: Vec<f64>,
    thermal: f64,
    scale: f64,
}

impl Problem for PowerProblem {
    fn n_params(&self) -> usize {
        3
    }
    fn n_residuals(&self) -> usize {
        self.power.len()
    }
    // x = [ln(1/Q_sat), ln δ0, ln Pc]
    fn residuals(&self, x: &[f64]) -> DVector<f64> {
        let (a, d, pc) = (x[0].exp(), x[1].exp(), x[2].exp());
        DVector::from_iterator(
            self.power.len(),
            self.power
                .iter()
                .zip(&self.loss)
                .map(|(p, l)| (a + d * self.thermal / (1.0 + p / pc).sqrt() - l) / self.scale),
        )
    }
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (a, d, pc) = (x[0].exp(), x[1].exp(), x[2].exp());
        DMatrix::from_fn(self.power.len(), 3, |i, j| {
            let u = self.power[i] / pc;
            let tls = d * self.thermal / (1.0 + u).sqrt();
            let v = match j {
                0 => a,
                1 => tls,
                _ => 0.5 * tls * u / (1.0 + u),
            };
            v / self.scale
        })
    }
}

/// Fits Q_sat, δ0 and Pc to (P_in [W], Qi) pairs at fixed temperature.
pub fn fit_power_sweep(data: &[(f64, f64)], omega: f64, t: f64) -> Result<PowerSweepFit> {
    validate_sweep(data, MIN_POWER_POINTS, "power sweep")?;
    check_positive(omega, t)?;
    let power: Vec<f64> = data.iter().map(|d| d.0).collect();
    let loss: Vec<f64> = data.iter().map(|d| 1.0 / d.1).collect();
    let (p_min, p_max) = power.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    if p_max / p_min < 1e3 {
        return Err(Error::invalid("power sweep", "powers must span at least 3 decades"));
    }
    let thermal = tls_thermal(omega, t);
    let scale = loss.iter().sum::<f64>() / loss.len() as f64;

    let mut best: Option<(f64, f64, f64, f64)> = None;
    for pc in log_grid(p_min * 1e-3, p_max * 1e3, 241) {
        let g: Vec<f64> = power.iter().map(|p| thermal / (1.0 + p / pc).sqrt()).collect();
        if let Some((a, b, ssr)) = positive_affine_fit(&g, &loss) {
            if best.is_none_or(|bst| ssr < bst.3) {
                best = Some((a, b, pc, ssr));
            }
        }
    }
    let (a, b, pc, _) = best.ok_or_else(|| Error::NoSolution("no positive loss decomposition".into()))?;

    let problem = PowerProblem { power, loss, thermal, scale };
    let out = lm::minimize(&problem, &[a.ln(), b.ln(), pc.ln()], &LmConfig::default())?;
    let sd = out.stderr();
    let x = &out.params;
    // Q_sat = e^{−x0}
    let q_sat = (-x[0]).exp();
    Ok(PowerSweepFit {
        q_sat: Estimate { value: q_sat, stderr: q_sat * sd[0] },
        delta0: Estimate { value: x[1].exp(), stderr: x[1].exp() * sd[1] },
        pc_watts: Estimate { value: x[2].exp(), stderr: x[2].exp() * sd[2] },
        residual_rms: scale * (out.ssr / problem.power.len() as f64).sqrt(),
        iterations: out.iterations,
        converged: out.converged,
    })
}

struct TemperatureProblem {
    temps: Vec<f64>,
    loss: Vec<f64>,
    omega: f64,
    /// 1/√(1 + P/Pc)
    saturation: f64,
    alpha_k: f64,
    scale: f64,
    tc_bounds: (f64, f64),
    /// `Some(tc)` freezes Tc and fits only the first two parameters.
    frozen_tc: Option<f64>,
}

impl TemperatureProblem {
    fn tls_shape(&self, t: f64) -> f64 {
        self.saturation * tls_thermal(self.omega, t)
    }

    fn qp(&self, t: f64, tc: f64) -> f64 {
        let qp = QpParams { tc, alpha_k: self.alpha_k };
        qp_loss(&qp, self.omega, t).unwrap_or(f64::INFINITY)
    }

    fn tc(&self, x: &[f64]) -> f64 {
        self.frozen_tc.unwrap_or_else(|| x[2].exp())
    }
}

impl Problem for TemperatureProblem {
    fn n_params(&self) -> usize {
        if self.frozen_tc.is_some() {
            2
        } else {
            3
        }
    }
    fn n_residuals(&self) -> usize {
        self.temps.len()
    }
    // x = [ln(1/Q_other), ln δ0, ln Tc]
    fn residuals(&self, x: &[f64]) -> DVector<f64> {
        let (a, d, tc) = (x[0].exp(), x[1].exp(), self.tc(x));
        DVector::from_iterator(
            self.temps.len(),
            self.temps
                .iter()
                .zip(&self.loss)
                .map(|(&t, l)| (a + d * self.tls_shape(t) + self.qp(t, tc) - l) / self.scale),
        )
    }
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (a, d, tc) = (x[0].exp(), x[1].exp(), self.tc(x));
        DMatrix::from_fn(self.temps.len(), self.n_params(), |i, j| {
            let t = self.temps[i];
            let v = match j {
                0 => a,
                1 => d * self.tls_shape(t),
                // δ_qp ∝ exp(−GAP_RATIO·Tc/T)
                _ => -self.qp(t, tc) * GAP_RATIO * tc / t,
            };
            v / self.scale
        })
    }
    fn project(&self, x: &mut [f64]) {
        if self.frozen_tc.is_none() {
            x[2] = x[2].clamp(self.tc_bounds.0.ln(), self.tc_bounds.1.ln());
        }
    }
}

/// Fits Q_other, δ0 and Tc to (T [K], Qi) pairs at fixed drive power.
///
/// `pc_watts` sets the TLS saturation factor; `None` treats the drive as far
/// below saturation. α_k is held at `alpha_k`.
pub fn fit_temperature_sweep(
    data: &[(f64, f64)],
    omega: f64,
    p_in: f64,
    pc_watts: Option<f64>,
    alpha_k: f64,
) -> Result<TemperatureSweepFit> {
    validate_sweep(data, MIN_TEMPERATURE_POINTS, "temperature sweep")?;
    ensure_positive("omega", omega)?;
    QpParams::new(1.0, alpha_k)?;
    let saturation = match pc_watts {
        Some(pc) => {
            ensure_positive("pc_watts", pc)?;
            1.0 / (1.0 + p_in.max(0.0) / pc).sqrt()
        }
        None => 1.0,
    };
    let temps: Vec<f64> = data.iter().map(|d| d.0).collect();
    let loss: Vec<f64> = data.iter().map(|d| 1.0 / d.1).collect();
    let t_max = temps.iter().cloned().fold(0.0, f64::max);
    let scale = loss.iter().sum::<f64>() / loss.len() as f64;
    let mut problem = TemperatureProblem {
        temps,
        loss,
        omega,
        saturation,
        alpha_k,
        scale,
        tc_bounds: (1.01 * t_max, 1000.0 * t_max),
        frozen_tc: None,
    };

    let mut best: Option<(f64, f64, f64, f64)> = None;
    for tc in log_grid(problem.tc_bounds.0, problem.tc_bounds.1, 301) {
        let g: Vec<f64> = problem.temps.iter().map(|&t| problem.tls_shape(t)).collect();
        let y: Vec<f64> = problem.temps.iter().zip(&problem.loss).map(|(&t, l)| l - problem.qp(t, tc)).collect();
        if let Some((a, b, ssr)) = positive_affine_fit(&g, &y) {
            if best.is_none_or(|bst| ssr < bst.3) {
                best = Some((a, b, tc, ssr));
            }
        }
    }
    let (a, b, tc, _) = best.ok_or_else(|| Error::NoSolution("no positive loss decomposition".into()))?;

    let start = [a.ln(), b.ln(), tc.ln()];
    let n = problem.temps.len() as f64;
    let (params, tc_sd_log, ssr, iterations, converged, sd) = match lm::minimize(&problem, &start, &LmConfig::default())
    {
        Ok(out) => {
            let sd = out.stderr();
            (out.params.clone(), sd[2], out.ssr, out.iterations, out.converged, sd)
        }
        Err(Error::Singular) => {
            // Quasiparticle loss is invisible at every point: Tc is unidentifiable.
            problem.frozen_tc = Some(tc);
            let out = lm::minimize(&problem, &start[..2], &LmConfig::default())?;
            let sd = out.stderr();
            let mut params = out.params.clone();
            params.push(tc.ln());
            (params, f64::INFINITY, out.ssr, out.iterations, out.converged, sd)
        }
        Err(e) => return Err(e),
    };
    let tc_value = params[2].exp();
    let tc_est = Estimate { value: tc_value, stderr: tc_value * tc_sd_log };
    let q_other = (-params[0]).exp();
    Ok(TemperatureSweepFit {
        q_other: Estimate { value: q_other, stderr: q_other * sd[0] },
        delta0: Estimate { value: params[1].exp(), stderr: params[1].exp() * sd[1] },
        tc: tc_est,
        residual_rms: scale * (ssr / n).sqrt(),
        iterations,
        converged,
        tc_unconstrained: !(tc_est.relative_stderr() <= 0.5),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    const F0: f64 = 7.955e9;

    fn omega() -> f64 {
        2.0 * std::f64::consts::PI * F0
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn paper_tls() -> TlsParams {
        TlsParams::new(2.3e-5, 1e-16).unwrap()
    }

    fn composite() -> CompositeLossParams {
        CompositeLossParams {
            tls: paper_tls(),
            qp: QpParams::with_tc(10.0).unwrap(),
            q_sat: 18_000.0,
            q_other: 18_000.0,
        }
    }

    fn p_low() -> f64 {
        crate::dbm_to_watts(-141.0).unwrap()
    }

    #[test]
    fn tls_limits() {
        let tls = paper_tls();
        let d = tls_loss(&tls, omega(), 1e-5, 1e-30).unwrap();
        assert!(rel(d, 2.3e-5) < 1e-12);
        let half = tls_loss(&tls, omega(), 1e-5, tls.pc_watts).unwrap();
        assert!(rel(half, 2.3e-5 / 2f64.sqrt()) < 1e-12);
        let x = CONSTANTS.hbar * omega() / (2.0 * CONSTANTS.kb * 0.01);
        assert!(rel(tls_loss(&tls, omega(), 0.01, 0.0).unwrap(), 2.3e-5 * x.tanh()) < 1e-14);
    }

    #[test]
    fn tls_decreasing_in_power_and_temperature() {
        let tls = paper_tls();
        let mut prev = f64::INFINITY;
        for k in 0..60 {
            let p = 1e-20 * 10f64.powf(k as f64 / 10.0);
            let d = tls_loss(&tls, omega(), 0.02, p).unwrap();
            assert!(d < prev);
            prev = d;
        }
        let mut prev = f64::INFINITY;
        for k in 1..100 {
            let d = tls_loss(&tls, omega(), 0.01 * k as f64, 1e-18).unwrap();
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn qi_power_limits_and_monotone() {
        let tls = paper_tls();
        assert!(rel(qi_power_model(1e3, 18_000.0, &tls, omega(), 0.01).unwrap(), 18_000.0) < 1e-4);
        let mut prev = 0.0;
        for k in 0..70 {
            let q = qi_power_model(1e-21 * 10f64.powf(k as f64 / 10.0), 18_000.0, &tls, omega(), 0.01).unwrap();
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn qp_freezes_out_and_rises() {
        let qp = QpParams::with_tc(10.0).unwrap();
        assert!(qp_loss(&qp, omega(), 0.05).unwrap() < 1e-100);
        assert_eq!(qp_loss(&qp, omega(), 1e-4).unwrap(), 0.0);
        let mut prev = 0.0;
        for k in 0..=490 {
            let t = 0.1 + 0.01 * k as f64;
            let d = qp_loss(&qp, omega(), t).unwrap();
            assert!(d > prev, "not increasing at {t}");
            prev = d;
        }
        assert!(qp_loss(&qp, omega(), 10.0).is_err());
    }

    #[test]
    fn printed_form_is_reciprocal() {
        let qp = QpParams::with_tc(10.0).unwrap();
        let phys = qp_loss(&qp, omega(), 1.5).unwrap();
        let printed = qp_loss_with_form(&qp, omega(), 1.5, QpForm::Printed).unwrap();
        assert!(rel(phys * printed, 1.0) < 1e-12);
    }

    #[test]
    fn temperature_model_shape() {
        let p = composite();
        let t: Vec<f64> = (1..=300).map(|k| 0.01 * k as f64).collect();
        let q: Vec<f64> = t.iter().map(|&t| qi_temperature_model(t, &p, omega(), p_low()).unwrap()).collect();
        let (peak, _) = q.iter().enumerate().fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert!(q[peak] > q[0] && q[peak] > q[q.len() - 1]);
        assert!(t[peak] > 0.5 && t[peak] < 2.0, "peak at {}", t[peak]);

        let no_qp = |t: f64| 1.0 / (1.0 / p.q_other + tls_loss(&p.tls, omega(), t, p_low()).unwrap());
        let mut prev = 0.0;
        for &ti in &t {
            assert!(no_qp(ti) >= prev);
            prev = no_qp(ti);
        }

        let limit = qi_temperature_model(1e-4, &p, omega(), 0.0).unwrap();
        assert!(rel(limit, 1.0 / (1.0 / 18_000.0 + 2.3e-5)) < 1e-12);
    }

    #[test]
    fn composite_is_sum_of_channels() {
        let p = composite();
        for t in [0.02, 0.3, 1.0, 2.5] {
            let direct =
                1.0 / p.q_other + tls_loss(&p.tls, omega(), t, p_low()).unwrap() + qp_loss(&p.qp, omega(), t).unwrap();
            let q = qi_temperature_model(t, &p, omega(), p_low()).unwrap();
            assert!(rel(1.0 / q, direct) < 1e-12);
        }
    }

    #[test]
    fn qp_shift_examples() {
        let qp = QpParams::with_tc(10.0).unwrap();
        assert!(qp_frequency_shift(&qp, 1e-3).unwrap().abs() < 1e-300);
        let expected = 0.5 * ((1.76f64 * 10.0 / (2.0 * 2.0)).tanh() - 1.0);
        assert!(rel(qp_frequency_shift(&qp, 2.0).unwrap(), expected) < 1e-12);
        let mut prev = 0.0;
        for k in 1..500 {
            let s = qp_frequency_shift(&qp, 0.02 * k as f64).unwrap();
            assert!(s <= 0.0 && s <= prev);
            prev = s;
        }
    }

    #[test]
    fn loss_and_shift_co_monotone() {
        let qp = QpParams::with_tc(10.0).unwrap();
        let mut last = (0.0, 0.0);
        for k in 0..40 {
            let t = 0.5 + 0.1 * k as f64;
            let now = (qp_loss(&qp, omega(), t).unwrap(), qp_frequency_shift(&qp, t).unwrap());
            assert!(now.0 > last.0 && now.1 < last.1);
            last = now;
        }
    }

    #[test]
    fn tls_shift_limits() {
        assert!(tls_frequency_shift(2.3e-5, omega(), 1e-4).unwrap().abs() < 1e-12);
        let low = tls_frequency_shift(2.3e-5, omega(), 0.05).unwrap();
        assert!(low < 0.0);
        let mut prev = 0.0;
        for t in [2.0, 4.0, 8.0, 16.0, 32.0] {
            let s = tls_frequency_shift(2.3e-5, omega(), t).unwrap();
            assert!(s > prev);
            prev = s;
        }
        // Doubling T adds δ0·ln2/π at high temperature.
        let step = tls_frequency_shift(2.3e-5, omega(), 64.0).unwrap() - prev;
        assert!(rel(step, 2.3e-5 * std::f64::consts::LN_2 / std::f64::consts::PI) < 1e-3);
    }

    fn power_sweep(noise: f64, seed: u64) -> Vec<(f64, f64)> {
        let tls = paper_tls();
        let mut rng = rng::stream(seed, 0);
        (0..25)
            .map(|k| {
                let p = 1e-19 * 10f64.powf(6.0 * k as f64 / 24.0);
                let q = qi_power_model(p, 18_000.0, &tls, omega(), 0.01).unwrap();
                (p, q * (1.0 + noise * rng.sample::<f64, _>(rand_distr::StandardNormal)))
            })
            .collect()
    }

    #[test]
    fn power_fit_round_trip() {
        let fit = fit_power_sweep(&power_sweep(0.0, 0), omega(), 0.01).unwrap();
        assert!(fit.converged);
        assert!(rel(fit.delta0.value, 2.3e-5) < 0.05);
        assert!(rel(fit.q_sat.value, 18_000.0) < 0.05);
        assert!(rel(fit.pc_watts.value, 1e-16) < 0.05);
    }

    #[test]
    fn power_fit_noisy_median() {
        let mut d_err = Vec::new();
        let mut q_err = Vec::new();
        for seed in 0..50 {
            let fit = fit_power_sweep(&power_sweep(0.02, seed), omega(), 0.01).unwrap();
            d_err.push(rel(fit.delta0.value, 2.3e-5));
            q_err.push(rel(fit.q_sat.value, 18_000.0));
        }
        d_err.sort_by(f64::total_cmp);
        q_err.sort_by(f64::total_cmp);
        assert!(d_err[25] < 0.15 && q_err[25] < 0.15, "{} {}", d_err[25], q_err[25]);
    }

    #[test]
    fn power_fit_rejects_short_input() {
        let data = power_sweep(0.0, 0);
        assert!(fit_power_sweep(&data[..3], omega(), 0.01).is_err());
    }

    fn temperature_sweep(t_max: f64, n: usize, noise: f64, seed: u64) -> Vec<(f64, f64)> {
        let p = composite();
        let mut rng = rng::stream(seed, 0);
        (0..n)
            .map(|k| {
                let t = 0.01 + (t_max - 0.01) * k as f64 / (n - 1) as f64;
                let q = qi_temperature_model(t, &p, omega(), p_low()).unwrap();
                (t, q * (1.0 + noise * rng.sample::<f64, _>(rand_distr::StandardNormal)))
            })
            .collect()
    }

    #[test]
    fn temperature_fit_round_trip() {
        let fit =
            fit_temperature_sweep(&temperature_sweep(2.5, 40, 0.0, 0), omega(), p_low(), Some(1e-16), 1.0).unwrap();
        assert!(fit.converged);
        assert!(rel(fit.tc.value, 10.0) < 0.05, "tc {}", fit.tc.value);
        assert!(rel(fit.q_other.value, 18_000.0) < 0.05);
        assert!(rel(fit.delta0.value, 2.3e-5) < 0.05);
        assert!(!fit.tc_unconstrained);
    }

    #[test]
    fn temperature_fit_flags_missing_qp_signature() {
        let data = temperature_sweep(0.9, 30, 0.005, 4);
        let fit = fit_temperature_sweep(&data, omega(), p_low(), Some(1e-16), 1.0).unwrap();
        assert!(fit.tc_unconstrained, "tc {:?}", fit.tc);
    }

    #[test]
    fn temperature_fit_is_order_independent() {
        let mut data = temperature_sweep(2.5, 30, 0.003, 9);
        data.push(data[7]);
        let a = fit_temperature_sweep(&data, omega(), p_low(), Some(1e-16), 1.0).unwrap();
        data.reverse();
        let b = fit_temperature_sweep(&data, omega(), p_low(), Some(1e-16), 1.0).unwrap();
        assert!(rel(a.tc.value, b.tc.value) < 1e-6);
        assert!(rel(a.q_other.value, b.q_other.value) < 1e-6);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(TlsParams::new(0.0, 1.0).is_err());
        assert!(QpParams::new(10.0, 1.5).is_err());
        assert!(qp_frequency_shift(&QpParams::with_tc(10.0).unwrap(), 0.0).is_err());
    }
}
