//! A small Levenberg-Marquardt solver shared by every fit in the crate.
//!
//! Problems supply real residuals and an analytic Jacobian. Box constraints
//! are handled by projecting each trial point; most fits in this crate avoid
//! them through log-parameterization instead.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub trait Problem {
    fn n_params(&self) -> usize;

    fn n_residuals(&self) -> usize;

    fn residuals(&self, params: &[f64]) -> DVector<f64>;

    /// `n_residuals × n_params` Jacobian of [`Problem::residuals`].
    fn jacobian(&self, params: &[f64]) -> DMatrix<f64>;

    /// Pulls a trial point back into the feasible box. Default: unconstrained.
    fn project(&self, _params: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy)]
pub struct LmConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub damping_init: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { max_iter: 200, rel_tol: 1e-10, damping_init: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub ssr: f64,
    /// Sum of squared residuals at the starting point.
    pub initial_ssr: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Gauss-Newton covariance scaled by the residual variance.
    pub covariance: DMatrix<f64>,
}

impl LmOutcome {
    pub fn stderr(&self) -> Vec<f64> {
        (0..self.params.len()).map(|i| self.covariance[(i, i)].max(0.0).sqrt()).collect()
    }
}

const DAMPING_MAX: f64 = 1e16;

pub fn minimize<P: Problem + ?Sized>(problem: &P, start: &[f64], config: &LmConfig) -> Result<LmOutcome> {
    let n = problem.n_params();
    if start.len() != n {
        return Err(Error::invalid("start", format!("expected {n} parameters, got {}", start.len())));
    }
    if config.max_iter == 0 {
        return Err(Error::invalid("max_iter", "must be >= 1"));
    }
    if !(config.rel_tol > 0.0) {
        return Err(Error::invalid("rel_tol", "must be > 0"));
    }

    let mut params = start.to_vec();
    problem.project(&mut params);
    let mut r = problem.residuals(&params);
    let mut ssr = r.norm_squared();
    if !ssr.is_finite() {
        return Err(Error::invalid("start", "residuals are not finite at the starting point"));
    }
    let initial_ssr = ssr;
    let mut lambda = config.damping_init;
    let mut iterations = 0;
    let mut converged = ssr == 0.0;

    let mut jac = problem.jacobian(&params);
    let mut jtj = jac.tr_mul(&jac);
    let mut grad = jac.tr_mul(&r);
    if (0..n).any(|i| jtj[(i, i)] == 0.0) && ssr > 0.0 {
        return Err(Error::Singular);
    }

    while !converged && iterations < config.max_iter {
        iterations += 1;
        let mut a = jtj.clone();
        for i in 0..n {
            let d = jtj[(i, i)].max(f64::MIN_POSITIVE);
            a[(i, i)] += lambda * d;
        }
        let step = match a.cholesky() {
            Some(ch) => ch.solve(&(-&grad)),
            None => {
                lambda *= 10.0;
                if lambda > DAMPING_MAX {
                    break;
                }
                continue;
            }
        };

        let mut trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
        problem.project(&mut trial);
        let step_norm = trial.iter().zip(&params).map(|(t, p)| (t - p).powi(2)).sum::<f64>().sqrt();
        let param_norm = params.iter().map(|p| p * p).sum::<f64>().sqrt();
        let small_step = step_norm <= config.rel_tol * (param_norm + config.rel_tol);

        let r_trial = problem.residuals(&trial);
        let ssr_trial = r_trial.norm_squared();

        if ssr_trial.is_finite() && ssr_trial < ssr {
            let reduction = (ssr - ssr_trial) / ssr;
            params = trial;
            r = r_trial;
            ssr = ssr_trial;
            lambda = (lambda / 10.0).max(1e-15);
            jac = problem.jacobian(&params);
            jtj = jac.tr_mul(&jac);
            grad = jac.tr_mul(&r);
            if ssr == 0.0 || reduction < config.rel_tol || small_step {
                converged = true;
            }
        } else {
            // No improvement possible along a vanishing step: we sit at the optimum.
            if small_step {
                converged = true;
                break;
            }
            lambda *= 10.0;
            if lambda > DAMPING_MAX {
                break;
            }
        }
    }

    let covariance = scaled_covariance(&jtj, ssr, problem.n_residuals(), n)?;
    Ok(LmOutcome { params, ssr, initial_ssr, iterations, converged, covariance })
}

/// `(JᵀJ)⁻¹ · SSR/(m − n)`, inverted after equilibrating the diagonal.
fn scaled_covariance(jtj: &DMatrix<f64>, ssr: f64, m: usize, n: usize) -> Result<DMatrix<f64>> {
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = jtj[(i, i)];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    if scale.contains(&0.0) {
        return Err(Error::Singular);
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] * scale[i] * scale[j]);
    let inv = scaled.cholesky().ok_or(Error::Singular)?.inverse();
    let dof = if m > n { (m - n) as f64 } else { 1.0 };
    let variance = ssr / dof;
    Ok(DMatrix::from_fn(n, n, |i, j| inv[(i, j)] * scale[i] * scale[j] * variance))
}

/// Central-difference Jacobian. Test helper for validating analytic Jacobians.
pub fn numeric_jacobian<P: Problem + ?Sized>(problem: &P, params: &[f64], rel_step: f64) -> DMatrix<f64> {
    let m = problem.n_residuals();
    let n = problem.n_params();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let h = rel_step * params[j].abs().max(1.0);
        let mut hi = params.to_vec();
        let mut lo = params.to_vec();
        hi[j] += h;
        lo[j] -= h;
        let diff = (problem.residuals(&hi) - problem.residuals(&lo)) / (2.0 * h);
        jac.set_column(j, &diff);
    }
    jac
}
