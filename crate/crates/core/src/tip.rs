//! Tip-sample capacitance, distance calibration from approach curves, and
//! synthetic scan images.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::lm::{self, LmConfig, Problem};
use crate::quantities::CONSTANTS;
use crate::resonator::{s11_model, ResonatorParams};
use crate::rng;

/// Far-retracted tip height used as the zero of every ΔC and Δf0.
pub const REFERENCE_DISTANCE: f64 = 100e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipModel {
    /// Effective apex radius in m.
    pub radius: f64,
    /// Distance-independent stray capacitance in F.
    pub c_stray: f64,
    /// Number of image-charge terms summed explicitly.
    pub series_terms: usize,
}

impl Default for TipModel {
    fn default() -> Self {
        TipModel { radius: 1e-6, c_stray: 0.0, series_terms: 20 }
    }
}

impl TipModel {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("radius", self.radius)?;
        if !(self.c_stray >= 0.0 && self.c_stray.is_finite()) {
            return Err(Error::invalid("c_stray", "must be finite and >= 0"));
        }
        if self.series_terms < 2 {
            return Err(Error::invalid("series_terms", "must be >= 2"));
        }
        Ok(())
    }

    /// Full width at half maximum of the imaging kernel at `height`.
    pub fn kernel_width(&self, height: f64) -> f64 {
        2.0 * self.radius * (1.0 + height / self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Metal,
    Dielectric(f64),
}

impl Material {
    /// Image-charge response: 1 for metal, (εr − 1)/(εr + 1) for a dielectric.
    pub fn response(self) -> f64 {
        match self {
            Material::Metal => 1.0,
            Material::Dielectric(eps) => (eps - 1.0) / (eps + 1.0),
        }
    }
}

/// Σ_{n≥1} sinh β / sinh(nβ): explicit terms up to `terms`, geometric closure beyond.
fn image_sum(beta: f64, terms: usize) -> f64 {
    let one_minus_e2 = -(-2.0 * beta).exp_m1();
    let mut sum = 0.0;
    for n in 1..=terms {
        let nf = n as f64;
        // sinh β / sinh nβ = e^{−(n−1)β}(1 − e^{−2β})/(1 − e^{−2nβ})
        sum += (-(nf - 1.0) * beta).exp() * one_minus_e2 / (-(-2.0 * nf * beta).exp_m1());
    }
    // Σ_{n>K} 1/sinh(nβ) = 2 Σ_m e^{−(2m+1)(K+1)β} / (1 − e^{−(2m+1)β})
    let k1 = (terms + 1) as f64;
    let sinh_beta = 0.5 * (-beta).exp().recip() * one_minus_e2;
    let mut tail = 0.0;
    for m in 0..200 {
        let odd = (2 * m + 1) as f64;
        let term = 2.0 * (-odd * k1 * beta).exp() / (-(-odd * beta).exp_m1());
        tail += term;
        if term < 1e-18 * (sum / sinh_beta + tail) {
            break;
        }
    }
    sum + sinh_beta * tail
}

/// Sphere-over-plane capacitance at gap `d`, scaled by the sample response.
pub fn cap_model(d: f64, tip: &TipModel, response: f64) -> Result<f64> {
    tip.validate()?;
    if !(d > 0.0) {
        return Err(Error::invalid("d", format!("distance must be > 0, got {d}")));
    }
    if !(0.0..=1.0).contains(&response) {
        return Err(Error::invalid("response", format!("must lie in [0, 1], got {response}")));
    }
    Ok(response * geometric_cap(d, tip) + tip.c_stray)
}

/// Distance-dependent part for a metal sample.
fn geometric_cap(d: f64, tip: &TipModel) -> f64 {
    if d.is_infinite() {
        return 4.0 * std::f64::consts::PI * CONSTANTS.eps0 * tip.radius;
    }
    let x = d / tip.radius;
    let beta = (x + (x * (2.0 + x)).sqrt()).ln_1p();
    4.0 * std::f64::consts::PI * CONSTANTS.eps0 * tip.radius * image_sum(beta, tip.series_terms)
}

/// C(d) − C(∞) for a metal sample: the part of the capacitance that depends on distance.
pub fn cap_excess(d: f64, tip: &TipModel) -> Result<f64> {
    tip.validate()?;
    ensure_positive("d", d)?;
    Ok(geometric_cap(d, tip) - geometric_cap(f64::INFINITY, tip))
}

/// C(d) − C(reference distance) for a metal sample.
pub fn delta_cap(d: f64, tip: &TipModel) -> Result<f64> {
    Ok(cap_model(d, tip, 1.0)? - cap_model(REFERENCE_DISTANCE, tip, 1.0)?)
}

fn delta_cap_slope(d: f64, tip: &TipModel) -> f64 {
    let h = 1e-5 * d;
    (geometric_cap(d + h, tip) - geometric_cap(d - h, tip)) / (2.0 * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Tip-sample gap at zero scanner displacement, m.
    pub d0: f64,
    /// Capacitance per unit frequency shift, F/Hz. ΔC = −alpha_cal·Δf0.
    pub alpha_cal: f64,
    /// RMS capacitance residual, F.
    pub residual_rms: f64,
    pub d0_stderr: f64,
    pub alpha_cal_stderr: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const MIN_APPROACH_POINTS: usize = 6;

/// Approach-curve shift Δf0 for a tip at scanner position z (gap d0 − z).
pub fn approach_shift(z: f64, d0: f64, alpha_cal: f64, tip: &TipModel) -> Result<f64> {
    ensure_positive("alpha_cal", alpha_cal)?;
    Ok(-delta_cap(d0 - z, tip)? / alpha_cal)
}

struct CalibrationProblem<'a> {
    z: Vec<f64>,
    shift: Vec<f64>,
    z_max: f64,
    tip: &'a TipModel,
    scale: f64,
}

impl CalibrationProblem<'_> {
    fn unpack(&self, x: &[f64]) -> (f64, f64) {
        (self.z_max + x[0].exp(), x[1].exp())
    }
}

impl Problem for CalibrationProblem<'_> {
    fn n_params(&self) -> usize {
        2
    }
    fn n_residuals(&self) -> usize {
        self.z.len()
    }
    // x = [ln(d0 − z_max), ln α]
    fn residuals(&self, x: &[f64]) -> DVector<f64> {
        let (d0, alpha) = self.unpack(x);
        let far = geometric_cap(REFERENCE_DISTANCE, self.tip);
        DVector::from_iterator(
            self.z.len(),
            self.z.iter().zip(&self.shift).map(|(z, df)| {
                let model = geometric_cap(d0 - z, self.tip) - far;
                (-alpha * df - model) / self.scale
            }),
        )
    }
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (d0, alpha) = self.unpack(x);
        let gap = x[0].exp();
        DMatrix::from_fn(self.z.len(), 2, |i, j| {
            let v = match j {
                0 => -delta_cap_slope(d0 - self.z[i], self.tip) * gap,
                _ => -alpha * self.shift[i],
            };
            v / self.scale
        })
    }
}

/// Fits (d0, α_cal) to an approach curve of (z [m], Δf0 [Hz]) pairs.
///
/// The gap is d0 − z, so larger z brings the tip closer.
pub fn calibrate_distance(approach: &[(f64, f64)], tip: &TipModel) -> Result<CalibrationResult> {
    tip.validate()?;
    if approach.len() < MIN_APPROACH_POINTS {
        return Err(Error::invalid(
            "approach",
            format!("need >= {MIN_APPROACH_POINTS} points, got {}", approach.len()),
        ));
    }
    for w in approach.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::invalid("approach", "z values must be strictly increasing"));
        }
    }
    if approach.iter().any(|(z, f)| !z.is_finite() || !f.is_finite()) {
        return Err(Error::invalid("approach", "non-finite values"));
    }
    let z: Vec<f64> = approach.iter().map(|p| p.0).collect();
    let shift: Vec<f64> = approach.iter().map(|p| p.1).collect();
    let z_max = z[z.len() - 1];
    let z_min = z[0];
    let scale = 4.0 * std::f64::consts::PI * CONSTANTS.eps0 * tip.radius;
    let problem = CalibrationProblem { z, shift, z_max, tip, scale };

    // Grid over the gap at closest approach; α in closed form for each.
    let far = geometric_cap(REFERENCE_DISTANCE, tip);
    let reach = (REFERENCE_DISTANCE - (z_max - z_min)).max(tip.radius * 1e-2);
    let mut best: Option<(f64, f64, f64)> = None;
    for k in 0..400 {
        let gap = tip.radius * 1e-3 * (reach / (tip.radius * 1e-3)).powf(k as f64 / 399.0);
        let d0 = z_max + gap;
        let model: Vec<f64> = problem.z.iter().map(|z| geometric_cap(d0 - z, tip) - far).collect();
        let num: f64 = model.iter().zip(&problem.shift).map(|(m, f)| -m * f).sum();
        let den: f64 = problem.shift.iter().map(|f| f * f).sum();
        if !(num > 0.0 && den > 0.0) {
            continue;
        }
        let alpha = num / den;
        // Relative misfit.
        let ssr: f64 = model.iter().zip(&problem.shift).map(|(m, f)| (-alpha * f - m).powi(2)).sum::<f64>()
            / model.iter().map(|m| m * m).sum::<f64>();
        if best.is_none_or(|b| ssr < b.2) {
            best = Some((gap, alpha, ssr));
        }
    }
    let (gap, alpha, _) =
        best.ok_or_else(|| Error::NoSolution("approach curve has no frequency decrease toward the sample".into()))?;

    let out = lm::minimize(&problem, &[gap.ln(), alpha.ln()], &LmConfig::default())?;
    let (d0, alpha_cal) = problem.unpack(&out.params);
    let sd = out.stderr();
    Ok(CalibrationResult {
        d0,
        alpha_cal,
        residual_rms: scale * (out.ssr / problem.z.len() as f64).sqrt(),
        d0_stderr: (d0 - z_max) * sd[0],
        alpha_cal_stderr: alpha_cal * sd[1],
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Tip-sample gap that produces the shift `delta_f0` over metal.
pub fn distance_from_shift(delta_f0: f64, cal: &CalibrationResult, tip: &TipModel) -> Result<f64> {
    tip.validate()?;
    ensure_positive("alpha_cal", cal.alpha_cal)?;
    if !delta_f0.is_finite() {
        return Err(Error::invalid("delta_f0", "must be finite"));
    }
    if delta_f0 == 0.0 {
        return Ok(REFERENCE_DISTANCE);
    }
    let target = -cal.alpha_cal * delta_f0;
    let d_min = tip.radius * 1e-4;
    let max_dc = delta_cap(d_min, tip)?;
    if !(target > 0.0 && target < max_dc) {
        return Err(Error::invalid(
            "delta_f0",
            format!("shift {delta_f0} Hz lies outside the model range (0, {:.4e}) Hz", -max_dc / cal.alpha_cal),
        ));
    }
    let (mut lo, mut hi) = (d_min.ln(), REFERENCE_DISTANCE.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if delta_cap(mid.exp(), tip)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Row-major grid of sample cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialMap {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Material>,
    /// Pixel pitch, m.
    pub pitch: f64,
    /// Position of cell (0, 0), m.
    pub origin: (f64, f64),
}

impl MaterialMap {
    pub fn new(rows: usize, cols: usize, cells: Vec<Material>, pitch: f64, origin: (f64, f64)) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("map", "empty map"));
        }
        if cells.len() != rows * cols {
            return Err(Error::invalid("map", format!("expected {} cells, got {}", rows * cols, cells.len())));
        }
        ensure_positive("pitch", pitch)?;
        for c in &cells {
            if let Material::Dielectric(eps) = c {
                if !(*eps >= 1.0 && eps.is_finite()) {
                    return Err(Error::invalid("map", format!("relative permittivity must be >= 1, got {eps}")));
                }
            }
        }
        Ok(MaterialMap { rows, cols, cells, pitch, origin })
    }

    pub fn uniform(rows: usize, cols: usize, material: Material, pitch: f64) -> Result<Self> {
        Self::new(rows, cols, vec![material; rows * cols], pitch, (0.0, 0.0))
    }

    /// Metal film with a centred square hole of side `hole` exposing `substrate`.
    pub fn square_hole(size: usize, pitch: f64, hole: f64, substrate: Material) -> Result<Self> {
        let centre = 0.5 * (size as f64 - 1.0);
        let half = 0.5 * hole / pitch;
        let cells = (0..size * size)
            .map(|i| {
                let (r, c) = ((i / size) as f64, (i % size) as f64);
                if (r - centre).abs() < half && (c - centre).abs() < half {
                    substrate
                } else {
                    Material::Metal
                }
            })
            .collect();
        Self::new(size, size, cells, pitch, (0.0, 0.0))
    }

    pub fn get(&self, row: usize, col: usize) -> Material {
        self.cells[row * self.cols + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanChannel {
    /// Resonator phase at the unperturbed f0, rad.
    #[default]
    Phase,
    /// Resonance frequency shift, Hz.
    Frequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanImage {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub pitch: f64,
    pub origin: (f64, f64),
    pub channel: ScanChannel,
}

impl ScanImage {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    /// Tip height above the surface, m.
    pub height: f64,
    /// RMS capacitance noise added per pixel, F.
    pub noise_rms: f64,
    pub seed: u64,
    pub channel: ScanChannel,
}

/// Raised-cosine weights on the pixel lattice, normalized to unit sum.
fn kernel(tip: &TipModel, height: f64, pitch: f64) -> Vec<(isize, isize, f64)> {
    let width = tip.kernel_width(height);
    let reach = (width / pitch).floor() as isize;
    let mut taps = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let r = pitch * ((dx * dx + dy * dy) as f64).sqrt();
            if r < width {
                taps.push((dy, dx, 0.5 * (1.0 + (std::f64::consts::PI * r / width).cos())));
            }
        }
    }
    let total: f64 = taps.iter().map(|t| t.2).sum();
    taps.iter_mut().for_each(|t| t.2 /= total);
    taps
}

/// Synthesizes the image seen by the tip scanning `map` at constant height.
///
/// Each pixel's material response is averaged under the tip kernel, turned
/// into a capacitance relative to bare metal, then into a frequency shift
/// through the calibration and finally into the resonator phase at the
/// unperturbed resonance. Metal therefore reads exactly zero.
pub fn simulate_scan(
    map: &MaterialMap,
    tip: &TipModel,
    resonator: &ResonatorParams,
    cal: &CalibrationResult,
    settings: &ScanSettings,
) -> Result<ScanImage> {
    tip.validate()?;
    resonator.validate()?;
    ensure_positive("height", settings.height)?;
    ensure_positive("alpha_cal", cal.alpha_cal)?;
    if !(settings.noise_rms >= 0.0 && settings.noise_rms.is_finite()) {
        return Err(Error::invalid("noise_rms", "must be finite and >= 0"));
    }
    if map.cells.is_empty() {
        return Err(Error::invalid("map", "empty map"));
    }
    let taps = kernel(tip, settings.height, map.pitch);
    let c_geom = geometric_cap(settings.height, tip);
    let response: Vec<f64> = map.cells.iter().map(|m| m.response()).collect();
    let reference = s11_model(resonator, resonator.f0)?.arg();
    let (rows, cols) = (map.rows, map.cols);

    let mut values = vec![0.0; rows * cols];
    values.par_chunks_mut(cols).enumerate().try_for_each(|(r, out)| -> Result<()> {
        for (c, v) in out.iter_mut().enumerate() {
            let mut avg = 0.0;
            for &(dy, dx, w) in &taps {
                let rr = (r as isize + dy).clamp(0, rows as isize - 1) as usize;
                let cc = (c as isize + dx).clamp(0, cols as isize - 1) as usize;
                avg += w * response[rr * cols + cc];
            }
            let index = (r * cols + c) as u64;
            let noise = if settings.noise_rms > 0.0 {
                rng::gaussian(&mut rng::stream(settings.seed, index), settings.noise_rms)
            } else {
                0.0
            };
            let dc = (avg - 1.0) * c_geom + noise;
            let df = -dc / cal.alpha_cal;
            *v = match settings.channel {
                ScanChannel::Frequency => df,
                ScanChannel::Phase => {
                    let shifted = ResonatorParams { f0: resonator.f0 + df, ..*resonator };
                    let phase = s11_model(&shifted, resonator.f0)?.arg() - reference;
                    Complex64::from_polar(1.0, phase).arg()
                }
            };
        }
        Ok(())
    })?;
    Ok(ScanImage { rows, cols, values, pitch: map.pitch, origin: map.origin, channel: settings.channel })
}

/// 10%–90% rise distance of a single monotone edge.
pub fn edge_resolution(linecut: &[f64], pitch: f64) -> Result<f64> {
    ensure_positive("pitch", pitch)?;
    if linecut.len() < 3 {
        return Err(Error::invalid("linecut", "need at least 3 samples"));
    }
    if linecut.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("linecut", "non-finite samples"));
    }
    let first = linecut[0];
    let last = linecut[linecut.len() - 1];
    let step = last - first;
    let range = linecut.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - linecut.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(step.abs() > 0.0) || range == 0.0 {
        return Err(Error::invalid("linecut", "flat linecut has no edge"));
    }
    let tol = 1e-9 * range;
    let sign = step.signum();
    if linecut.windows(2).any(|w| sign * (w[1] - w[0]) < -tol) {
        return Err(Error::invalid("linecut", "linecut is not monotone"));
    }
    let norm: Vec<f64> = linecut.iter().map(|v| (v - first) / step).collect();
    let crossing = |level: f64| -> f64 {
        for i in 0..norm.len() - 1 {
            if norm[i] <= level && norm[i + 1] >= level {
                let span = norm[i + 1] - norm[i];
                let frac = if span > 0.0 { (level - norm[i]) / span } else { 0.0 };
                return (i as f64 + frac) * pitch;
            }
        }
        (norm.len() - 1) as f64 * pitch
    };
    Ok(crossing(0.9) - crossing(0.1))
}

/// Edge width of the steepest edge in `line`, measured over the monotone run around it.
pub fn steepest_edge_resolution(line: &[f64], pitch: f64) -> Result<f64> {
    if line.len() < 3 {
        return Err(Error::invalid("linecut", "need at least 3 samples"));
    }
    let (k, _) = line.windows(2).enumerate().map(|(i, w)| (i, (w[1] - w[0]).abs())).fold((0, 0.0), |acc, x| {
        if x.1 > acc.1 {
            x
        } else {
            acc
        }
    });
    let dir = (line[k + 1] - line[k]).signum();
    if dir == 0.0 {
        return Err(Error::invalid("linecut", "flat linecut has no edge"));
    }
    let mut lo = k;
    while lo > 0 && dir * (line[lo] - line[lo - 1]) > 0.0 {
        lo -= 1;
    }
    let mut hi = k + 1;
    while hi + 1 < line.len() && dir * (line[hi + 1] - line[hi]) > 0.0 {
        hi += 1;
    }
    edge_resolution(&line[lo..=hi], pitch)
}
