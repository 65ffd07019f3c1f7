//! Damped least squares (Levenberg–Marquardt) with a forward-difference
//! Jacobian, sized for the handful of parameters of a resonance fit.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_tol: f64,
    /// Forward-difference step relative to `max(|x|, 1)`.
    pub jacobian_step: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_tol: 1e-10,
            jacobian_step: 1e-6,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// `Σ r²` at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_DAMPING: f64 = 1e16;

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimises `Σ r_i(x)²` where `residuals(x, r)` fills the `m` residuals.
///
/// A residual evaluation that errors or yields non-finite values is treated
/// as an infinitely bad trial point, so the damping simply increases.
pub fn minimize<F>(residuals: F, x0: &[f64], m: usize, opts: &LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let n = x0.len();
    let eval = |x: &[f64], r: &mut [f64]| -> f64 {
        match residuals(x, r) {
            Ok(()) if r.iter().all(|v| v.is_finite()) => sum_sq(r),
            _ => f64::INFINITY,
        }
    };

    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    residuals(&x, &mut r)?;
    let mut cost = sum_sq(&r);
    let mut lambda = opts.initial_damping;
    let mut jac = DMatrix::<f64>::zeros(m, n);
    let mut r_trial = vec![0.0; m];
    let mut x_trial = vec![0.0; n];

    let mut iterations = 0;
    let mut converged = cost == 0.0;
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        for k in 0..n {
            let h = opts.jacobian_step * x[k].abs().max(1.0);
            x_trial.copy_from_slice(&x);
            x_trial[k] += h;
            let h = x_trial[k] - x[k];
            residuals(&x_trial, &mut r_trial)?;
            for i in 0..m {
                jac[(i, k)] = (r_trial[i] - r[i]) / h;
            }
        }
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let dmax = (0..n).map(|k| a[(k, k)]).fold(0.0, f64::max);
        if dmax == 0.0 {
            converged = true;
            break;
        }

        loop {
            let mut damped = a.clone();
            for k in 0..n {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-12 * dmax);
            }
            let rhs = -&g;
            let step = damped
                .clone()
                .cholesky()
                .map(|c| c.solve(&rhs))
                .or_else(|| damped.lu().solve(&rhs));
            let trial_cost = match step {
                Some(step) => {
                    for k in 0..n {
                        x_trial[k] = x[k] + step[k];
                    }
                    eval(&x_trial, &mut r_trial)
                }
                None => f64::INFINITY,
            };
            if trial_cost < cost {
                let rel = (cost - trial_cost) / cost;
                x.copy_from_slice(&x_trial);
                r.copy_from_slice(&r_trial);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                if rel < opts.rel_tol || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > MAX_DAMPING {
                // no descent direction left at machine precision
                converged = true;
                break;
            }
        }
    }
    Ok(LmOutcome {
        x,
        cost,
        iterations,
        converged,
    })
}
