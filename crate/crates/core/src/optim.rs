//! Deterministic full-batch gradient descent with Armijo backtracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub max_iters: usize,
    /// Initial trial step.
    pub step_size: f64,
    pub grad_tol: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings { max_iters: 5000, step_size: 1.0, grad_tol: 1e-8 }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::Config(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step_size must be positive, got {}", self.step_size)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimOutcome {
    pub theta: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;

/// Minimizes `objective`, which returns `(value, gradient)`.
///
/// A trial point whose evaluation fails with a domain error is treated like a
/// rejected step. Any other error aborts. The starting point must evaluate.
pub fn minimize<F>(mut objective: F, theta0: Vec<f64>, settings: &OptimizerSettings) -> Result<OptimOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    settings.validate()?;
    let mut theta = theta0;
    let (mut value, mut grad) = objective(&theta)?;
    if !value.is_finite() {
        return Err(Error::domain("objective", value, "starting point"));
    }
    let mut trace = vec![value];
    let mut step = settings.step_size;
    let mut iterations = 0;
    let mut gn = norm2(&grad);
    let mut stalled = false;

    while gn > settings.grad_tol && iterations < settings.max_iters {
        iterations += 1;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            match objective(&trial) {
                Ok((v, g)) if v.is_finite() && v <= value - ARMIJO_C * step * gn * gn => {
                    accepted = Some((trial, v, g));
                    break;
                }
                Ok(_) | Err(Error::Domain { .. }) => step *= 0.5,
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some((t, v, g)) => {
                theta = t;
                value = v;
                grad = g;
                gn = norm2(&grad);
                trace.push(value);
                step *= 2.0;
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    let converged = gn <= settings.grad_tol;
    if !converged {
        log::warn!(
            "optimizer stopped without convergence after {iterations} iterations (|grad| = {gn:.3e}{})",
            if stalled { ", line search stalled" } else { "" }
        );
    }
    Ok(OptimOutcome { theta, value, grad_norm: gn, trace, converged, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_converges() {
        // f = (x − 3)² + 10 (y + 1)²
        let f = |t: &[f64]| {
            Ok(((t[0] - 3.0).powi(2) + 10.0 * (t[1] + 1.0).powi(2), vec![2.0 * (t[0] - 3.0), 20.0 * (t[1] + 1.0)]))
        };
        let out = minimize(f, vec![0.0, 0.0], &OptimizerSettings::default()).unwrap();
        assert!(out.converged);
        assert!((out.theta[0] - 3.0).abs() < 1e-8 && (out.theta[1] + 1.0).abs() < 1e-8);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn domain_errors_shrink_the_step() {
        // −log x + x, minimum at 1, undefined for x <= 0.
        let f = |t: &[f64]| {
            if t[0] <= 0.0 {
                Err(Error::domain("test", t[0], "x"))
            } else {
                Ok((-t[0].ln() + t[0], vec![-1.0 / t[0] + 1.0]))
            }
        };
        let s = OptimizerSettings { step_size: 100.0, ..Default::default() };
        let out = minimize(f, vec![5.0], &s).unwrap();
        assert!(out.converged);
        assert!((out.theta[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let f = |t: &[f64]| Ok((t[0].exp(), vec![t[0].exp()]));
        let s = OptimizerSettings { max_iters: 3, ..Default::default() };
        let out = minimize(f, vec![0.0], &s).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
    }

    #[test]
    fn bad_settings() {
        let f = |_: &[f64]| Ok((0.0, vec![0.0]));
        assert!(minimize(f, vec![0.0], &OptimizerSettings { grad_tol: 0.0, ..Default::default() }).is_err());
        assert!(minimize(f, vec![0.0], &OptimizerSettings { max_iters: 0, ..Default::default() }).is_err());
    }
}
