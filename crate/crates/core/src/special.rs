//! Special functions needed by the loss models.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Modified Bessel function of the second kind, order zero.
///
/// Uses the ascending series for `x <= 2` and Steed's continued fraction
/// (Temme's CF2) above it. Both branches are accurate to a few ulps.
pub fn bessel_k0(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::invalid("x", format!("K0 requires x > 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(if x <= 2.0 { k0_series(x) } else { k0_continued_fraction(x) })
}

/// `e^x · K0(x)`, finite for arguments where K0 itself underflows.
pub fn bessel_k0_scaled(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::invalid("x", format!("K0 requires x > 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(if x <= 2.0 { k0_series(x) * x.exp() } else { k0_cf_scaled(x) })
}

fn k0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut term = 1.0;
    let mut i0 = 1.0;
    let mut harmonic_sum = 0.0;
    let mut harmonic = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        harmonic_sum += term * harmonic;
        if term < 1e-18 * i0 {
            break;
        }
    }
    -log_term * i0 + harmonic_sum
}

fn k0_continued_fraction(x: f64) -> f64 {
    k0_cf_scaled(x) * (-x).exp()
}

fn k0_cf_scaled(x: f64) -> f64 {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    (std::f64::consts::PI / (2.0 * x)).sqrt() / s
}

/// Bernoulli-derived coefficients B_{2k}/(2k) of the digamma asymptotic series.
const DIGAMMA_ASYMPTOTIC: [f64; 7] =
    [1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0, 1.0 / 132.0, -691.0 / 32760.0, 1.0 / 12.0];

/// Re ψ(1/2 + i·y).
///
/// Lifts the argument with ψ(z) = ψ(z + N) − Σ 1/(z + k) until |z + N| ≥ 12,
/// then applies the asymptotic expansion. Exactly even in `y`.
pub fn re_digamma_half_plus_imag(y: f64) -> f64 {
    let y = y.abs();
    let mut z = Complex64::new(0.5, y);
    let mut shift = 0.0;
    while z.norm() < 12.0 {
        // Re 1/z
        shift += z.re / z.norm_sqr();
        z += 1.0;
    }
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut power = inv2;
    for c in DIGAMMA_ASYMPTOTIC {
        series += power * c;
        power *= inv2;
    }
    let psi = z.ln() - inv * 0.5 - series;
    psi.re - shift
}
