//! Phase-noise spectra and their conversion to frequency and capacitance noise.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::resonator::{phase_slope_at_resonance, ResonatorParams};
use crate::rng;

pub const MIN_SERIES_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimeSeries {
    sample_rate: f64,
    samples: Vec<f64>,
}

impl PhaseTimeSeries {
    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        ensure_positive("sample_rate", sample_rate)?;
        if samples.len() < MIN_SERIES_LEN {
            return Err(Error::invalid("samples", format!("need >= {MIN_SERIES_LEN} samples, got {}", samples.len())));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("samples", "non-finite sample"));
        }
        Ok(PhaseTimeSeries { sample_rate, samples })
    }

    /// White Gaussian phase noise of per-sample rms `sigma`.
    pub fn white(sigma: f64, sample_rate: f64, len: usize, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, 0);
        Self::new(sample_rate, (0..len).map(|_| rng::gaussian(&mut r, sigma)).collect())
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn variance(&self) -> f64 {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        self.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumUnit {
    /// rad/√Hz
    Phase,
    /// Hz/√Hz
    Frequency,
    /// F/√Hz
    Capacitance,
}

/// One-sided amplitude spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrum {
    pub freqs: Vec<f64>,
    pub asd: Vec<f64>,
    pub unit: SpectrumUnit,
}

impl NoiseSpectrum {
    pub fn resolution(&self) -> f64 {
        self.freqs[1] - self.freqs[0]
    }

    fn scaled(&self, factor: f64, unit: SpectrumUnit) -> NoiseSpectrum {
        NoiseSpectrum { freqs: self.freqs.clone(), asd: self.asd.iter().map(|a| a * factor).collect(), unit }
    }

    /// Mean ASD over bins whose frequency lies in [lo, hi].
    pub fn mean_level(&self, lo: f64, hi: f64) -> f64 {
        let vals: Vec<f64> =
            self.freqs.iter().zip(&self.asd).filter(|(f, _)| **f >= lo && **f <= hi).map(|(_, a)| *a).collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    }

    /// RMS over [0, bandwidth]: ∫ ASD² df with bin k covering [(k−½)Δf, (k+½)Δf],
    /// the first nonzero bin extended down to DC and the DC bin dropped.
    pub fn band_rms(&self, bandwidth: f64) -> f64 {
        let df = self.resolution();
        let last = self.freqs.len() - 1;
        let nyquist = self.freqs[last];
        let mut power = 0.0;
        for k in 1..=last {
            let lower = if k == 1 { 0.0 } else { (k as f64 - 0.5) * df };
            let upper = if k == last { nyquist } else { (k as f64 + 0.5) * df };
            let weight = (bandwidth.min(upper) - lower).max(0.0);
            power += self.asd[k].powi(2) * weight;
        }
        power.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    /// Samples per segment, a power of two.
    pub segment_len: usize,
    /// Fractional overlap between consecutive segments.
    pub overlap: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        WelchConfig { segment_len: 1024, overlap: 0.5 }
    }
}

fn hann(len: usize) -> Vec<f64> {
    (0..len).map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / len as f64).cos())).collect()
}

fn detrend(seg: &[f64]) -> Vec<f64> {
    let n = seg.len() as f64;
    let xm = 0.5 * (n - 1.0);
    let ym = seg.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in seg.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    seg.iter().enumerate().map(|(i, y)| y - ym - slope * (i as f64 - xm)).collect()
}

/// Welch estimate of the phase ASD: Hann window, per-segment linear detrend, one-sided.
pub fn phase_psd(series: &PhaseTimeSeries, config: &WelchConfig) -> Result<NoiseSpectrum> {
    let len = config.segment_len;
    if !len.is_power_of_two() || len < 8 {
        return Err(Error::invalid("segment_len", format!("must be a power of two >= 8, got {len}")));
    }
    if len > series.samples.len() {
        return Err(Error::invalid("segment_len", format!("{len} exceeds series length {}", series.samples.len())));
    }
    if !(0.0..=0.9).contains(&config.overlap) {
        return Err(Error::invalid("overlap", format!("must lie in [0, 0.9], got {}", config.overlap)));
    }
    let step = ((len as f64 * (1.0 - config.overlap)).round() as usize).max(1);
    let n_seg = (series.samples.len() - len) / step + 1;
    let window = hann(len);
    let norm = series.sample_rate * window.iter().map(|w| w * w).sum::<f64>();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let half = len / 2;

    let periodograms: Vec<Vec<f64>> = (0..n_seg)
        .into_par_iter()
        .map(|s| {
            let seg = detrend(&series.samples[s * step..s * step + len]);
            let mut buf: Vec<Complex<f64>> = seg.iter().zip(&window).map(|(x, w)| Complex::new(x * w, 0.0)).collect();
            fft.process(&mut buf);
            (0..=half)
                .map(|k| {
                    let p = buf[k].norm_sqr() / norm;
                    if k == 0 || k == half {
                        p
                    } else {
                        2.0 * p
                    }
                })
                .collect()
        })
        .collect();
    let mut psd = vec![0.0; half + 1];
    for p in &periodograms {
        for (acc, v) in psd.iter_mut().zip(p) {
            *acc += v;
        }
    }
    let df = series.sample_rate / len as f64;
    Ok(NoiseSpectrum {
        freqs: (0..=half).map(|k| k as f64 * df).collect(),
        asd: psd.iter().map(|p| (p / n_seg as f64).sqrt()).collect(),
        unit: SpectrumUnit::Phase,
    })
}

/// δf = S_φ / |dφ/df|
pub fn frequency_noise(phase: &NoiseSpectrum, slope: f64) -> Result<NoiseSpectrum> {
    if phase.unit != SpectrumUnit::Phase {
        return Err(Error::invalid("spectrum", "expected a phase spectrum"));
    }
    if !(slope.is_finite() && slope != 0.0) {
        return Err(Error::invalid("slope", format!("must be finite and nonzero, got {slope}")));
    }
    Ok(phase.scaled(1.0 / slope.abs(), SpectrumUnit::Frequency))
}

/// δC = α_cal·δf
pub fn capacitance_noise(freq: &NoiseSpectrum, alpha_cal: f64) -> Result<NoiseSpectrum> {
    if freq.unit != SpectrumUnit::Frequency {
        return Err(Error::invalid("spectrum", "expected a frequency spectrum"));
    }
    ensure_positive("alpha_cal", alpha_cal)?;
    Ok(freq.scaled(alpha_cal, SpectrumUnit::Capacitance))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub phase: NoiseSpectrum,
    pub frequency: NoiseSpectrum,
    pub capacitance: NoiseSpectrum,
    /// dφ/df at the resonance, rad/Hz.
    pub slope: f64,
    /// (bandwidth Hz, rms capacitance F)
    pub bands: Vec<(f64, f64)>,
}

/// Full chain from a phase record to band-limited capacitance noise.
pub fn sensitivity_vs_bandwidth(
    series: &PhaseTimeSeries,
    params: &ResonatorParams,
    alpha_cal: f64,
    bands: &[f64],
    config: &WelchConfig,
) -> Result<SensitivityReport> {
    let lo = 1.0 / series.duration();
    let hi = 0.5 * series.sample_rate;
    for &b in bands {
        if !(b >= lo * (1.0 - 1e-12) && b <= hi * (1.0 + 1e-12)) {
            return Err(Error::invalid("bands", format!("{b} Hz outside [{lo}, {hi}] Hz")));
        }
    }
    let slope = phase_slope_at_resonance(params)?;
    let phase = phase_psd(series, config)?;
    let frequency = frequency_noise(&phase, slope)?;
    let capacitance = capacitance_noise(&frequency, alpha_cal)?;
    let bands = bands.iter().map(|&b| (b, capacitance.band_rms(b))).collect();
    Ok(SensitivityReport { phase, frequency, capacitance, slope, bands })
}
