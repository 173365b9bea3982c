//! End-to-end acceptance suite. Prints one line per criterion and exits
//! nonzero if any criterion fails or overruns its time budget.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use scanres_core::io;
use scanres_core::loss::{
    fit_power_sweep, fit_temperature_sweep, qi_power_model, qi_temperature_model, CompositeLossParams, QpParams,
    TlsParams,
};
use scanres_core::qubit::{
    fit_decay, fit_g_ref, gamma1_vs_distance, invert_spectrum, simulate_decay, transitions, CouplingModel, DecayTruth,
    Experiment, QuasiStatic, QubitResonatorParams, TransmonParams,
};
use scanres_core::resonator::{linewidth_grid, phase_slope_at_resonance};
use scanres_core::sensitivity::{phase_psd, sensitivity_vs_bandwidth, WelchConfig};
use scanres_core::special::{bessel_k0, re_digamma_half_plus_imag};
use scanres_core::tip::{
    approach_shift, calibrate_distance, distance_from_shift, simulate_scan, steepest_edge_resolution,
    CalibrationResult, Material, MaterialMap, ScanChannel, ScanSettings, TipModel,
};
use scanres_core::{
    average_photon_number, dbm_to_watts, fit_s11, rng, s11_model, synthesize_trace, total_q, FitConfig, NoiseSpec,
    ResonatorParams,
};

use common::{dir_contents, fixture, invocations, invoke, run, Invocation};

type Check = Result<String, String>;

/// Name, time budget in seconds, and the check itself.
type Criterion = (&'static str, f64, fn() -> Check);

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

fn s11_round_trip() -> Check {
    let truth =
        ResonatorParams { f0: 7.955e9, qi: 11_900.0, qc: 12_000.0, theta: -0.16, b_mag: 0.8, b_phase: 0.3, tau: 50e-9 };
    let freqs = linewidth_grid(&truth, 10.0, 401).map_err(|e| e.to_string())?;
    let clean = synthesize_trace(&truth, &freqs, &NoiseSpec::noiseless()).map_err(|e| e.to_string())?;
    let fit = fit_s11(&clean, &FitConfig::default(), None).map_err(|e| e.to_string())?.params;
    let errors = [
        ("f0", rel(fit.f0, truth.f0)),
        ("qi", rel(fit.qi, truth.qi)),
        ("qc", rel(fit.qc, truth.qc)),
        ("theta", rel(fit.theta, truth.theta)),
        ("b_mag", rel(fit.b_mag, truth.b_mag)),
        ("b_phase", rel(fit.b_phase, truth.b_phase)),
        ("tau", rel(fit.tau, truth.tau)),
    ];
    let worst = errors.iter().cloned().fold(("", 0.0), |a, e| if e.1 > a.1 { e } else { a });
    ensure(worst.1 < 1e-6, || format!("noiseless {} off by {:.2e}", worst.0, worst.1))?;

    let mut qi_err = Vec::new();
    for seed in 0..100 {
        let noisy = synthesize_trace(&truth, &freqs, &NoiseSpec { sigma: 0.005, seed }).map_err(|e| e.to_string())?;
        let fit = fit_s11(&noisy, &FitConfig::default(), None).map_err(|e| format!("seed {seed}: {e}"))?;
        qi_err.push(rel(fit.params.qi, truth.qi));
    }
    let med = median(qi_err);
    ensure(med < 0.02, || format!("median Qi error {med:.4}"))?;
    Ok(format!("noiseless worst {} {:.1e}, noisy median Qi error {:.4}", worst.0, worst.1, med))
}

fn photon_number() -> Check {
    let p = ResonatorParams::ideal(7.955e9, 11_900.0, 12_000.0, 0.0);
    let q = total_q(&p).map_err(|e| e.to_string())?;
    let p_in = dbm_to_watts(-141.0).map_err(|e| e.to_string())?;
    let n = average_photon_number(q, p.qc, p.f0, p_in).map_err(|e| e.to_string())?;

    let planck = 6.626_070_15e-34;
    let q_oracle = 1.0 / (1.0 / 11_900.0 + 1.0 / 12_000.0);
    let p_oracle = 1e-3 * 10f64.powf(-14.1);
    let n_oracle = 2.0 * q_oracle * q_oracle * p_oracle / (PI * 12_000.0 * planck * 7.955e9 * 7.955e9);
    ensure(rel(n, n_oracle) < 1e-12, || format!("n {n} vs oracle {n_oracle}"))?;
    ensure(n < 1.0, || format!("n = {n} is not below one photon"))?;
    for scale in [1e-3, 0.5, 2.0, 10.0, 1e4] {
        let ns = average_photon_number(q, p.qc, p.f0, scale * p_in).map_err(|e| e.to_string())?;
        ensure(rel(ns / n, scale) < 1e-12, || format!("scaling by {scale} gave ratio {}", ns / n))?;
    }
    Ok(format!("n = {n:.3} at -141 dBm, linear to 1e-12"))
}

fn loss_decomposition() -> Check {
    let omega = 2.0 * PI * 7.955e9;
    let (delta0, pc, q_sat, tc, q_other) = (2.3e-5, 1e-16, 18_000.0, 10.0, 18_000.0);
    let tls = TlsParams::new(delta0, pc).map_err(|e| e.to_string())?;
    let composite = CompositeLossParams { tls, qp: QpParams::new(tc, 1.0).map_err(|e| e.to_string())?, q_sat, q_other };
    let p_low = dbm_to_watts(-141.0).map_err(|e| e.to_string())?;

    let power = |noise: f64, seed: u64| -> Vec<(f64, f64)> {
        let mut r = rng::stream(seed, 0);
        (0..25)
            .map(|k| {
                let p = 1e-19 * 10f64.powf(6.0 * k as f64 / 24.0);
                (p, qi_power_model(p, q_sat, &tls, omega, 0.01).unwrap() * (1.0 + rng::gaussian(&mut r, noise)))
            })
            .collect()
    };
    let temperature = |noise: f64, seed: u64| -> Vec<(f64, f64)> {
        let mut r = rng::stream(seed, 0);
        (0..40)
            .map(|k| {
                let t = 0.01 + (2.5 - 0.01) * k as f64 / 39.0;
                (t, qi_temperature_model(t, &composite, omega, p_low).unwrap() * (1.0 + rng::gaussian(&mut r, noise)))
            })
            .collect()
    };

    let pf = fit_power_sweep(&power(0.0, 0), omega, 0.01).map_err(|e| e.to_string())?;
    let tf = fit_temperature_sweep(&temperature(0.0, 0), omega, p_low, Some(pc), 1.0).map_err(|e| e.to_string())?;
    let noiseless = [
        ("delta0 (power)", rel(pf.delta0.value, delta0)),
        ("q_sat", rel(pf.q_sat.value, q_sat)),
        ("tc", rel(tf.tc.value, tc)),
        ("q_other", rel(tf.q_other.value, q_other)),
        ("delta0 (temperature)", rel(tf.delta0.value, delta0)),
    ];
    for (name, err) in noiseless {
        ensure(err < 0.05, || format!("noiseless {name} off by {err:.4}"))?;
    }

    let mut errs: [Vec<f64>; 4] = Default::default();
    for seed in 0..50 {
        let pf = fit_power_sweep(&power(0.02, seed), omega, 0.01).map_err(|e| format!("seed {seed}: {e}"))?;
        let tf = fit_temperature_sweep(&temperature(0.02, seed), omega, p_low, Some(pc), 1.0)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        errs[0].push(rel(pf.delta0.value, delta0));
        errs[1].push(rel(pf.q_sat.value, q_sat));
        errs[2].push(rel(tf.tc.value, tc));
        errs[3].push(rel(tf.q_other.value, q_other));
    }
    let names = ["delta0", "q_sat", "tc", "q_other"];
    let medians: Vec<f64> = errs.into_iter().map(median).collect();
    for (name, m) in names.iter().zip(&medians) {
        ensure(*m < 0.15, || format!("noisy median {name} error {m:.4}"))?;
    }

    let temps: Vec<f64> = (0..600).map(|k| 0.01 + 3.0 * k as f64 / 599.0).collect();
    let qi: Vec<f64> = temps.iter().map(|&t| qi_temperature_model(t, &composite, omega, p_low).unwrap()).collect();
    let maxima: Vec<usize> = (1..qi.len() - 1).filter(|&i| qi[i] > qi[i - 1] && qi[i] >= qi[i + 1]).collect();
    let minima = (1..qi.len() - 1).filter(|&i| qi[i] < qi[i - 1] && qi[i] <= qi[i + 1]).count();
    ensure(maxima.len() == 1 && minima == 0, || format!("{} maxima, {minima} minima in Qi(T)", maxima.len()))?;
    Ok(format!(
        "noisy medians delta0 {:.3} q_sat {:.3} tc {:.3} q_other {:.3}, Qi(T) peaks at {:.2} K",
        medians[0], medians[1], medians[2], medians[3], temps[maxima[0]]
    ))
}

/// K0(x) = ∫₀^∞ exp(−x·cosh t) dt by the trapezoid rule, which converges
/// geometrically for this analytic, doubly decaying integrand.
fn k0_quadrature(x: f64) -> f64 {
    let t_max = (800.0 / x).acosh().max(1.0);
    let n = 20_000;
    let h = t_max / n as f64;
    let mut sum = 0.5 * (-x).exp();
    for k in 1..=n {
        let w = if k == n { 0.5 } else { 1.0 };
        sum += w * (-x * (k as f64 * h).cosh()).exp();
    }
    sum * h
}

/// Re ψ(½ + iy) = −γ + Σₙ [1/(n+1) − (n+½)/((n+½)² + y²)], summed directly to
/// N terms with an Euler–Maclaurin closure for the remainder.
fn re_digamma_series(y: f64) -> f64 {
    let n_terms = 200_000usize;
    let y2 = y * y;
    let term = |n: f64| 1.0 / (n + 1.0) - (n + 0.5) / ((n + 0.5) * (n + 0.5) + y2);
    let mut sum = 0.0;
    let mut carry = 0.0;
    for n in (0..n_terms).rev() {
        let v = term(n as f64) - carry;
        let t = sum + v;
        carry = (t - sum) - v;
        sum = t;
    }
    let big_n = n_terms as f64;
    let a = big_n + 0.5;
    let integral = 0.5 * (a * a + y2).ln() - (big_n + 1.0).ln();
    let derivative = -1.0 / ((big_n + 1.0) * (big_n + 1.0)) - (y2 - a * a) / ((a * a + y2) * (a * a + y2));
    let tail = integral + 0.5 * term(big_n) - derivative / 12.0;
    -0.577_215_664_901_532_9 + sum + tail
}

fn special_functions() -> Check {
    let mut worst_k0: f64 = 0.0;
    for x in log_grid(1e-3, 50.0, 60) {
        let got = bessel_k0(x).map_err(|e| e.to_string())?;
        let want = k0_quadrature(x);
        let err = rel(got, want);
        ensure(err < 1e-8, || format!("K0({x:.4e}) = {got:e}, oracle {want:e}"))?;
        worst_k0 = worst_k0.max(err);
    }
    let mut worst_psi: f64 = 0.0;
    for y in log_grid(1e-3, 1e3, 60) {
        let got = re_digamma_half_plus_imag(y);
        let want = re_digamma_series(y);
        let err = rel(got, want);
        ensure(err < 1e-8, || format!("Re psi(1/2 + i{y:.4e}) = {got:e}, oracle {want:e}"))?;
        worst_psi = worst_psi.max(err);
    }
    Ok(format!("worst relative error K0 {worst_k0:.1e}, Re psi {worst_psi:.1e} over 60-point grids"))
}

fn calibration_round_trip() -> Check {
    let tip = TipModel::default();
    let (d0, alpha) = (5e-6, 1.12e-23);
    let approach: Vec<(f64, f64)> = (0..30)
        .map(|k| {
            let z = 4.5e-6 * k as f64 / 29.0;
            (z, approach_shift(z, d0, alpha, &tip).unwrap())
        })
        .collect();
    let cal = calibrate_distance(&approach, &tip).map_err(|e| e.to_string())?;
    ensure(rel(cal.d0, d0) < 0.02, || format!("d0 {:.4e}", cal.d0))?;
    ensure(rel(cal.alpha_cal, alpha) < 0.02, || format!("alpha {:.4e}", cal.alpha_cal))?;

    let mut worst: f64 = 0.0;
    for d in log_grid(0.05e-6, 50e-6, 50) {
        let shift = approach_shift(d0 - d, d0, cal.alpha_cal, &tip).map_err(|e| e.to_string())?;
        let back = distance_from_shift(shift, &cal, &tip).map_err(|e| e.to_string())?;
        worst = worst.max(rel(back, d));
    }
    ensure(worst < 1e-6, || format!("distance inversion off by {worst:.2e}"))?;
    Ok(format!(
        "d0 error {:.1e}, alpha error {:.1e}, inversion {worst:.1e}",
        rel(cal.d0, d0),
        rel(cal.alpha_cal, alpha)
    ))
}

fn imaging_resolution() -> Check {
    let map = MaterialMap::square_hole(100, 0.2e-6, 10e-6, Material::Dielectric(9.4)).map_err(|e| e.to_string())?;
    let tip = TipModel { radius: 0.5e-6, ..TipModel::default() };
    let height = 0.5e-6;
    let resonator = ResonatorParams::ideal(7.955e9, 11_900.0, 3_000.0, 0.0);
    let cal = CalibrationResult {
        d0: 5e-6,
        alpha_cal: 1.12e-23,
        residual_rms: 0.0,
        d0_stderr: 0.0,
        alpha_cal_stderr: 0.0,
        iterations: 0,
        converged: true,
    };
    let settings = ScanSettings { height, noise_rms: 0.0, seed: 0, channel: ScanChannel::Phase };
    let image = simulate_scan(&map, &tip, &resonator, &cal, &settings).map_err(|e| e.to_string())?;
    ensure((tip.kernel_width(height) - 2e-6).abs() < 1e-12, || "kernel is not 2 um wide".into())?;

    let width = steepest_edge_resolution(image.row(image.rows / 2), image.pitch).map_err(|e| e.to_string())?;
    ensure(rel(width, 2e-6) < 0.25, || format!("edge width {width:.3e} m"))?;

    let reach = (tip.kernel_width(height) / image.pitch).ceil() as usize;
    let is_hole = |r: usize, c: usize| matches!(map.get(r, c), Material::Dielectric(_));
    let metal_far: Vec<(usize, usize)> = (0..image.rows)
        .flat_map(|r| (0..image.cols).map(move |c| (r, c)))
        .filter(|&(r, c)| {
            let rows = r.saturating_sub(reach)..=(r + reach).min(image.rows - 1);
            let cols = c.saturating_sub(reach)..=(c + reach).min(image.cols - 1);
            !rows.into_iter().any(|rr| cols.clone().any(|cc| is_hole(rr, cc)))
        })
        .collect();
    ensure(!metal_far.is_empty(), || "no metal pixels outside the kernel reach".into())?;
    let nonzero = metal_far.iter().filter(|&&(r, c)| image.get(r, c) != 0.0).count();
    ensure(nonzero == 0, || format!("{nonzero} metal pixels read nonzero phase"))?;
    Ok(format!("10-90% edge width {:.3} um, {} metal pixels exactly zero", width * 1e6, metal_far.len()))
}

fn sensitivity_chain() -> Check {
    let bytes = std::fs::read(fixture("timeseries/timeseries.csv")).map_err(|e| e.to_string())?;
    let series = io::read_timeseries_csv(bytes.as_slice()).map_err(|e| e.to_string())?;
    let resonator = ResonatorParams::ideal(7.955e9, 11_900.0, 3_000.0, 0.0);
    let alpha = 1.12e-23;
    let welch = WelchConfig { segment_len: 1024, overlap: 0.5 };

    let h = 1e-4 * resonator.f0 / total_q(&resonator).map_err(|e| e.to_string())?;
    let above = s11_model(&resonator, resonator.f0 + h).map_err(|e| e.to_string())?;
    let below = s11_model(&resonator, resonator.f0 - h).map_err(|e| e.to_string())?;
    let slope_oracle = (above / below).arg() / (2.0 * h);
    let slope = phase_slope_at_resonance(&resonator).map_err(|e| e.to_string())?;
    ensure(rel(slope, slope_oracle) < 1e-6, || format!("slope {slope:e} vs finite difference {slope_oracle:e}"))?;

    let report = sensitivity_vs_bandwidth(&series, &resonator, alpha, &[1.0], &welch).map_err(|e| e.to_string())?;
    let fs = series.sample_rate();
    let sigma = series.variance().sqrt();
    let prediction = alpha * sigma * (2.0 / fs).sqrt() / slope_oracle.abs();
    let measured = report.bands[0].1;
    ensure(rel(measured, prediction) < 0.10, || format!("dC(1 Hz) {measured:e} vs prediction {prediction:e}"))?;

    let psd = phase_psd(&series, &welch).map_err(|e| e.to_string())?;
    let parseval = psd.band_rms(0.5 * fs).powi(2) / series.variance();
    ensure((parseval - 1.0).abs() < 0.03, || format!("Parseval ratio {parseval:.4}"))?;

    let decades = (measured / 3e-21).log10().abs();
    ensure(decades < 0.5, || format!("{:.2} zF/rtHz is not of order 3 zF/rtHz", measured * 1e21))?;
    Ok(format!("dC(1 Hz) {:.3} zF vs predicted {:.3} zF, Parseval {parseval:.4}", measured * 1e21, prediction * 1e21))
}

fn transmon_spectra() -> Check {
    let bytes = std::fs::read(fixture("devices.csv")).map_err(|e| e.to_string())?;
    let rows = io::read_devices(bytes.as_slice()).map_err(|e| e.to_string())?;
    ensure(rows.len() == 17, || format!("{} device rows", rows.len()))?;
    let mut worst: f64 = 0.0;
    for row in &rows {
        let (ec, ej) = (row.ec_ghz * 1e9, row.ej_ghz * 1e9);
        let p = TransmonParams::new(ec, ej).map_err(|e| e.to_string())?;
        let f_ge = transitions(&p).map_err(|e| e.to_string())?.f_ge;
        let asymptotic = (8.0 * ej * ec).sqrt() - ec;
        let dev = rel(f_ge, asymptotic);
        ensure(dev < 0.03, || format!("{}: f_ge deviates {dev:.4}", row.device))?;
        worst = worst.max(dev);
    }
    let (f_ge, f_gf2) = (7679e6, 7528e6);
    let inv = invert_spectrum(f_ge, f_gf2).map_err(|e| e.to_string())?;
    let t = transitions(&inv.params).map_err(|e| e.to_string())?;
    let err = (t.f_ge - f_ge).abs().max((t.f_gf2 - f_gf2).abs());
    ensure(err < 1e3, || format!("inversion reproduces lines to {err:.1} Hz"))?;
    ensure(rel(inv.params.ec, 302e6) < 0.10, || format!("EC {:.1} MHz", inv.params.ec / 1e6))?;
    Ok(format!("17 rows within {:.2}%, inversion error {err:.2} Hz, EC {:.1} MHz", 100.0 * worst, inv.params.ec / 1e6))
}

fn purcell_decomposition() -> Check {
    let tip = TipModel::default();
    let base = QubitResonatorParams { g: 0.0, delta: -276e6, kappa: 8.34e6 };
    let gamma_other = 1e5;
    let d_ref = 2.5e-6;
    let gamma_ref = 1.0 / 3.8e-6;
    let g_true = ((gamma_ref - gamma_other) * base.delta * base.delta / base.kappa).sqrt();
    let truth = CouplingModel { tip, g_ref: g_true, d_ref };

    let ds = log_grid(1e-6, 30e-6, 15);
    let mut r = rng::stream(41, 0);
    let observed: Vec<(f64, f64)> = gamma1_vs_distance(&ds, &base, &truth, gamma_other)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(d, g1)| (d, g1 * (1.0 + rng::gaussian(&mut r, 0.05))))
        .collect();
    let g_fit = fit_g_ref(&observed, &base, &tip, d_ref, gamma_other).map_err(|e| e.to_string())?;
    let fitted = CouplingModel { g_ref: g_fit, ..truth };

    let curve =
        gamma1_vs_distance(&log_grid(0.2e-6, 1e-3, 200), &base, &fitted, gamma_other).map_err(|e| e.to_string())?;
    ensure(curve.windows(2).all(|w| w[1].1 < w[0].1), || "Gamma1(d) is not strictly decreasing".into())?;
    let far = curve.last().map_or(0.0, |p| p.1);
    ensure(far > gamma_other && rel(far, gamma_other) < 1e-3, || format!("far-field rate {far:e} /s"))?;

    let at_ref = gamma1_vs_distance(&[d_ref], &base, &fitted, gamma_other).map_err(|e| e.to_string())?[0].1;
    ensure(rel(at_ref, gamma_ref) < 0.20, || format!("T1 at 2.5 um = {:.3} us", 1e6 / at_ref))?;
    Ok(format!(
        "g_ref fitted {:.2} MHz (truth {:.2}), T1(2.5 um) {:.3} us, far rate {:.4e} /s",
        g_fit / 1e6,
        g_true / 1e6,
        1e6 / at_ref,
        far
    ))
}

fn linear(n: usize, t_max: f64) -> Vec<f64> {
    (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect()
}

fn fitted_constant(
    kind: Experiment,
    truth: DecayTruth,
    delays: &[f64],
    seed: u64,
    qs: Option<QuasiStatic>,
) -> Result<f64, String> {
    let trace = simulate_decay(kind, &truth, delays, 0.02, seed, qs).map_err(|e| e.to_string())?;
    Ok(fit_decay(&trace).map_err(|e| format!("{kind:?} seed {seed}: {e}"))?.time_constant.value)
}

fn coherence_fits() -> Check {
    let t1_delays = linear(100, 15e-6);
    let ramsey_delays = linear(200, 6e-6);
    let t1 = DecayTruth { time_constant: 3.8e-6, detuning: 0.0 };
    let t2 = DecayTruth { time_constant: 1.4e-6, detuning: 0.5e6 };
    let mut t1_err = Vec::new();
    let mut t2_err = Vec::new();
    for seed in 0..50 {
        t1_err.push(rel(fitted_constant(Experiment::T1, t1, &t1_delays, seed, None)?, t1.time_constant));
        t2_err.push(rel(fitted_constant(Experiment::Ramsey, t2, &ramsey_delays, seed, None)?, t2.time_constant));
    }
    let (m1, m2) = (median(t1_err), median(t2_err));
    ensure(m1 < 0.10, || format!("median T1 error {m1:.4}"))?;
    ensure(m2 < 0.10, || format!("median T2R error {m2:.4}"))?;

    let qs = Some(QuasiStatic { sigma: 150e3, realizations: 200 });
    let delays = linear(150, 8e-6);
    let ramsey = DecayTruth { time_constant: 2.5e-6, detuning: 0.5e6 };
    let echo = DecayTruth { time_constant: 2.5e-6, detuning: 0.0 };
    let seeds = 60;
    let mut wins = 0;
    for seed in 0..seeds {
        let t2r = fitted_constant(Experiment::Ramsey, ramsey, &delays, seed, qs)?;
        let t2e = fitted_constant(Experiment::Echo, echo, &delays, seed, qs)?;
        if t2e >= t2r {
            wins += 1;
        }
    }
    ensure(wins * 100 >= 95 * seeds, || format!("echo outlasts Ramsey in {wins}/{seeds} seeds"))?;
    Ok(format!("median T1 error {m1:.4}, T2R error {m2:.4}, echo >= Ramsey in {wins}/{seeds}"))
}

fn synth_invocations() -> Vec<Invocation> {
    [
        ("trace", "trace"),
        ("power-sweep", "power_sweep"),
        ("temperature-sweep", "temperature_sweep"),
        ("approach", "approach"),
        ("timeseries", "timeseries"),
        ("map", "map"),
        ("coherence", "coherence_ramsey"),
    ]
    .into_iter()
    .map(|(kind, dir)| (vec!["synth", kind], vec![("--config", fixture(&format!("{dir}/synth.toml")))]))
    .collect()
}

fn determinism() -> Check {
    let mut count = 0;
    for (args, paths) in invocations().into_iter().chain(synth_invocations()) {
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        for dir in [a.path(), b.path()] {
            let out = invoke(&args, &paths, Some(dir));
            ensure(out.status.success(), || format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))?;
        }
        ensure(dir_contents(a.path()) == dir_contents(b.path()), || format!("{args:?} differs between runs"))?;
        if !args.contains(&"synth") {
            let first = invoke(&args, &paths, None);
            let second = invoke(&args, &paths, None);
            ensure(first.stdout == second.stdout && !first.stdout.is_empty(), || {
                format!("{args:?} stdout report differs between runs")
            })?;
        }
        count += 1;
    }
    let schema = (run(&["schema"]), run(&["schema"]));
    ensure(schema.0.stdout == schema.1.stdout, || "schema output differs".into())?;
    Ok(format!("{} invocations byte-identical across repeated runs", count + 1))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("S11 round-trip", 10.0, s11_round_trip),
        ("photon number", 1.0, photon_number),
        ("loss decomposition", 30.0, loss_decomposition),
        ("special-function oracles", 5.0, special_functions),
        ("calibration round-trip", 5.0, calibration_round_trip),
        ("imaging resolution", 20.0, imaging_resolution),
        ("sensitivity chain", 10.0, sensitivity_chain),
        ("transmon spectra", 10.0, transmon_spectra),
        ("Purcell decomposition", 5.0, purcell_decomposition),
        ("coherence fits", 20.0, coherence_fits),
        ("determinism", f64::INFINITY, determinism),
    ];
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget")),
            Err(e) => (false, e),
        };
        if !pass {
            failures += 1;
        }
        let budget = if budget.is_finite() { format!("{budget:.0} s") } else { "none".into() };
        println!(
            "criterion {:2} {} {name}: {detail} ({elapsed:.2} s, budget {budget})",
            i + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
