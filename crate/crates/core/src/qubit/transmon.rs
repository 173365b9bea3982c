use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// Level shift tolerated when the charge basis grows by [`CONVERGENCE_STEP`] states per side.
pub const CONVERGENCE_TOL_HZ: f64 = 1e3;
pub const CONVERGENCE_STEP: usize = 5;
/// EJ/EC at and above which the device counts as a transmon.
pub const TRANSMON_RATIO: f64 = 10.0;

/// Cooper-pair-box parameters; energies are E/h in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    pub ec: f64,
    pub ej: f64,
    /// Offset charge in units of 2e.
    pub ng: f64,
    /// Charge states kept on each side of zero.
    pub ncut: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Transmon,
    /// EJ/EC below the transmon threshold; levels are charge sensitive.
    ChargeSensitive,
}

impl TransmonParams {
    pub fn new(ec: f64, ej: f64) -> Result<Self> {
        let p = TransmonParams { ec, ej, ng: 0.0, ncut: 30 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("ec", self.ec)?;
        ensure_positive("ej", self.ej)?;
        if !self.ng.is_finite() {
            return Err(Error::invalid("ng", "must be finite"));
        }
        if self.ncut < 10 {
            return Err(Error::invalid("ncut", format!("must be >= 10, got {}", self.ncut)));
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        if self.ej / self.ec >= TRANSMON_RATIO {
            Regime::Transmon
        } else {
            Regime::ChargeSensitive
        }
    }

    /// √(8·EJ·EC) − EC
    pub fn asymptotic_f_ge(&self) -> f64 {
        (8.0 * self.ej * self.ec).sqrt() - self.ec
    }
}

fn eigenvalues(p: &TransmonParams, ncut: usize) -> Vec<f64> {
    let dim = 2 * ncut + 1;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let n = i as f64 - ncut as f64;
        h[(i, i)] = 4.0 * p.ec * (n - p.ng).powi(2);
        if i + 1 < dim {
            h[(i, i + 1)] = -0.5 * p.ej;
            h[(i + 1, i)] = -0.5 * p.ej;
        }
    }
    let mut vals: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Lowest `n_levels` eigenvalues of the charge-basis Hamiltonian, ascending, in Hz.
///
/// Fails when enlarging the basis by [`CONVERGENCE_STEP`] moves any returned
/// level by more than [`CONVERGENCE_TOL_HZ`].
pub fn transmon_levels(p: &TransmonParams, n_levels: usize) -> Result<Vec<f64>> {
    p.validate()?;
    if n_levels == 0 || n_levels > 2 * p.ncut {
        return Err(Error::invalid("n_levels", format!("must lie in [1, {}], got {n_levels}", 2 * p.ncut)));
    }
    let base = eigenvalues(p, p.ncut);
    let wider = eigenvalues(p, p.ncut + CONVERGENCE_STEP);
    for k in 0..n_levels {
        let shift = (base[k] - wider[k]).abs();
        if shift > CONVERGENCE_TOL_HZ {
            return Err(Error::NoSolution(format!(
                "charge basis ncut={} not converged: level {k} moves {shift:.3e} Hz",
                p.ncut
            )));
        }
    }
    Ok(base[..n_levels].to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transitions {
    /// E1 − E0
    pub f_ge: f64,
    /// (E2 − E0)/2, the two-photon g→f line.
    pub f_gf2: f64,
    /// (E2 − E1) − (E1 − E0)
    pub anharmonicity: f64,
}

pub fn transitions(p: &TransmonParams) -> Result<Transitions> {
    let e = transmon_levels(p, 3)?;
    Ok(Transitions { f_ge: e[1] - e[0], f_gf2: 0.5 * (e[2] - e[0]), anharmonicity: (e[2] - e[1]) - (e[1] - e[0]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub params: TransmonParams,
    /// 2·(f_ge − f_gf2), the anharmonicity-based starting estimate of EC.
    pub ec_estimate: f64,
    pub iterations: usize,
    /// Largest deviation of the reproduced transitions from the inputs, Hz.
    pub max_error_hz: f64,
}

const INVERSION_TOL_HZ: f64 = 1.0;

/// (EC, EJ) reproducing the measured f_ge and two-photon f_gf/2 lines.
pub fn invert_spectrum(f_ge: f64, f_gf2: f64) -> Result<Inversion> {
    ensure_positive("f_ge", f_ge)?;
    ensure_positive("f_gf2", f_gf2)?;
    if f_gf2 >= f_ge {
        return Err(Error::invalid("f_gf2", "must lie below f_ge (negative anharmonicity)"));
    }
    let ec0 = 2.0 * (f_ge - f_gf2);
    let ej0 = (f_ge + ec0).powi(2) / (8.0 * ec0);
    let target = [f_ge, f_gf2];
    let residual = |ec: f64, ej: f64| -> Result<[f64; 2]> {
        let t = transitions(&TransmonParams::new(ec, ej)?)?;
        Ok([t.f_ge - target[0], t.f_gf2 - target[1]])
    };
    let norm = |r: &[f64; 2]| r[0].abs().max(r[1].abs());

    let (mut ec, mut ej) = (ec0, ej0);
    let mut r = residual(ec, ej)?;
    let mut iterations = 0;
    while norm(&r) > INVERSION_TOL_HZ {
        iterations += 1;
        if iterations > 100 {
            return Err(Error::NoSolution(format!(
                "Newton iteration stalled at EC={ec:.6e} Hz, EJ={ej:.6e} Hz with error {:.3e} Hz",
                norm(&r)
            )));
        }
        let (hc, hj) = (1e-6 * ec, 1e-6 * ej);
        let rc = residual(ec + hc, ej)?;
        let rj = residual(ec, ej + hj)?;
        let j = [[(rc[0] - r[0]) / hc, (rj[0] - r[0]) / hj], [(rc[1] - r[1]) / hc, (rj[1] - r[1]) / hj]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Singular);
        }
        let dc = -(j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let dj = -(-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        let mut step = 1.0;
        loop {
            let (nc, nj) = (ec + step * dc, ej + step * dj);
            if nc > 0.0 && nj > 0.0 {
                if let Ok(nr) = residual(nc, nj) {
                    if norm(&nr) < norm(&r) {
                        ec = nc;
                        ej = nj;
                        r = nr;
                        break;
                    }
                }
            }
            step *= 0.5;
            if step < 1e-6 {
                return Err(Error::NoSolution(format!(
                    "no descent direction from EC={ec:.6e} Hz, EJ={ej:.6e} Hz (error {:.3e} Hz)",
                    norm(&r)
                )));
            }
        }
    }
    let params = TransmonParams::new(ec, ej)?;
    if params.regime() != Regime::Transmon {
        return Err(Error::NoSolution(format!("solution EJ/EC = {:.2} lies outside the transmon regime", ej / ec)));
    }
    Ok(Inversion { params, ec_estimate: ec0, iterations, max_error_hz: norm(&r) })
}
