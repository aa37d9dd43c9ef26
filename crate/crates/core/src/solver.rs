//! Damped Newton iteration on 6-dimensional residuals.

use nalgebra::{Matrix6, Vector6};
use thiserror::Error;

pub type Vec6 = Vector6<f64>;

/// Reciprocal condition number below which the Jacobian counts as singular.
const MIN_RCOND: f64 = 1e-14;
const MAX_HALVINGS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// absolute tolerance on ‖residual‖
    pub tol: f64,
    pub max_iter: usize,
    /// relative forward-difference step
    pub fd_eps: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol: 1e-12,
            max_iter: 50,
            fd_eps: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOutcome {
    pub solution: Vec6,
    pub iterations: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SolveError {
    #[error("residual is not finite at the initial guess")]
    NonFiniteResidual,
    #[error("Jacobian is singular (reciprocal condition {rcond:e}) after {iterations} iterations")]
    SingularJacobian { iterations: usize, rcond: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual_norm:e})")]
    NotConverged {
        iterations: usize,
        residual_norm: f64,
        last: Vec6,
    },
}

fn jacobian<F>(residual: &mut F, x: &Vec6, r: &Vec6, fd_eps: f64) -> Matrix6<f64>
where
    F: FnMut(&Vec6) -> Vec6,
{
    let mut jac = Matrix6::zeros();
    for j in 0..6 {
        let step = fd_eps * x[j].abs().max(1.0);
        let mut xp = *x;
        xp[j] += step;
        // exact representable step
        let step = xp[j] - x[j];
        let col = (residual(&xp) - r) / step;
        jac.set_column(j, &col);
    }
    jac
}

fn reciprocal_condition(jac: &Matrix6<f64>) -> f64 {
    let sv = jac.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}

/// Newton iteration with a forward-difference Jacobian and a halving line
/// search on ‖residual‖.
///
/// Once the tolerance is met one more full step is attempted with the last
/// Jacobian and kept if it lowers the residual; this pushes conserved
/// quantities down to roundoff instead of leaving them at `tol`.
pub fn newton_solve<F>(
    mut residual: F,
    guess: Vec6,
    settings: &NewtonSettings,
) -> Result<NewtonOutcome, SolveError>
where
    F: FnMut(&Vec6) -> Vec6,
{
    let mut x = guess;
    let mut r = residual(&x);
    let mut norm = r.norm();
    if !norm.is_finite() {
        return Err(SolveError::NonFiniteResidual);
    }
    let mut last_jac: Option<Matrix6<f64>> = None;
    let mut iterations = 0;

    while norm > settings.tol {
        if iterations == settings.max_iter {
            return Err(SolveError::NotConverged {
                iterations,
                residual_norm: norm,
                last: x,
            });
        }
        let jac = jacobian(&mut residual, &x, &r, settings.fd_eps);
        let rcond = reciprocal_condition(&jac);
        let dx = match jac.lu().solve(&r) {
            Some(dx) if rcond >= MIN_RCOND => dx,
            _ => return Err(SolveError::SingularJacobian { iterations, rcond }),
        };
        iterations += 1;

        let mut lambda = 1.0;
        let mut trial = x - dx;
        let mut r_trial = residual(&trial);
        let mut halvings = 0;
        while !(r_trial.norm() < norm) && halvings < MAX_HALVINGS {
            lambda *= 0.5;
            trial = x - dx * lambda;
            r_trial = residual(&trial);
            halvings += 1;
        }
        if !r_trial.norm().is_finite() {
            return Err(SolveError::NotConverged {
                iterations,
                residual_norm: f64::INFINITY,
                last: x,
            });
        }
        x = trial;
        r = r_trial;
        norm = r.norm();
        last_jac = Some(jac);
    }

    if let Some(jac) = last_jac {
        if norm > 0.0 {
            if let Some(dx) = jac.lu().solve(&r) {
                let polished = x - dx;
                let r_polished = residual(&polished);
                if r_polished.norm() < norm {
                    x = polished;
                    norm = r_polished.norm();
                }
            }
        }
    }

    Ok(NewtonOutcome {
        solution: x,
        iterations,
        residual_norm: norm,
    })
}
