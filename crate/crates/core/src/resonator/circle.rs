use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ComplexTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
}

impl Circle {
    /// Root-mean-square radial deviation of `points` from the circle.
    pub fn rms_deviation(&self, points: &[Complex64]) -> f64 {
        let ss: f64 = points.iter().map(|p| ((p - self.center).norm() - self.radius).powi(2)).sum();
        (ss / points.len() as f64).sqrt()
    }
}

/// Algebraic circle fit of the trace samples (Taubin's method).
pub fn circle_fit(trace: &ComplexTrace) -> Result<Circle> {
    fit_points(trace.samples())
}

/// Taubin circle fit with Newton iteration on the characteristic polynomial.
/// Coordinates are centred and scaled before fitting.
pub fn fit_points(points: &[Complex64]) -> Result<Circle> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("circle fit needs >= 3 points, got {n}")));
    }
    let nf = n as f64;
    let mean = points.iter().sum::<Complex64>() / nf;
    let spread = (points.iter().map(|p| (p - mean).norm_sqr()).sum::<f64>() / nf).sqrt();
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(Error::Degenerate("all points coincide".into()));
    }

    let (mut mxx, mut myy, mut mxy, mut mxz, mut myz, mut mzz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let x = (p.re - mean.re) / spread;
        let y = (p.im - mean.im) / spread;
        let z = x * x + y * y;
        mxx += x * x;
        myy += y * y;
        mxy += x * y;
        mxz += x * z;
        myz += y * z;
        mzz += z * z;
    }
    mxx /= nf;
    myy /= nf;
    mxy /= nf;
    mxz /= nf;
    myz /= nf;
    mzz /= nf;

    let mz = mxx + myy;
    let cov_xy = mxx * myy - mxy * mxy;
    let var_z = mzz - mz * mz;
    let a3 = 4.0 * mz;
    let a2 = -3.0 * mz * mz - mzz;
    let a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
    let a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
    let a22 = a2 + a2;
    let a33 = 3.0 * a3;

    let mut x = 0.0;
    let mut y = a0;
    for _ in 0..100 {
        let dy = a1 + x * (a22 + a33 * x);
        let x_new = x - y / dy;
        if x_new == x || !x_new.is_finite() {
            break;
        }
        let y_new = a0 + x_new * (a1 + x_new * (a2 + x_new * a3));
        if y_new.abs() >= y.abs() {
            break;
        }
        x = x_new;
        y = y_new;
    }

    let det = x * x - x * mz + cov_xy;
    let cx = (mxz * (myy - x) - myz * mxy) / det / 2.0;
    let cy = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
    let radius = (cx * cx + cy * cy + mz).sqrt();
    if !radius.is_finite() || radius > 1e6 {
        return Err(Error::Degenerate("points are collinear".into()));
    }
    Ok(Circle { center: mean + Complex64::new(cx, cy) * spread, radius: radius * spread })
}
