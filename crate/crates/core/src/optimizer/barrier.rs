//! Log-barrier interior-point method for smooth convex programs.
//!
//! Minimizes `f0(x)` subject to constraints whose logarithmic barrier `phi`
//! is supplied by the problem. Centering uses damped Newton steps
//! (`1 / (1 + decrement)` while the decrement exceeds 1/4), which keeps
//! self-concordant barriers inside their domain without evaluating the
//! merit function. Each centering is followed by `tau <- mu * tau` until
//! the duality-gap bound `m / tau` drops below the target.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Below this decrement a step that fails to halve it is taken as rounding
/// noise rather than progress.
const STAGNATION_DECREMENT: f64 = 1e-2;

pub trait BarrierProblem {
    fn dimension(&self) -> usize;

    /// Sum of the barrier parameters of all constraints (`m` in the gap
    /// bound `m / tau`).
    fn barrier_parameter(&self) -> f64;

    /// True when `x` lies strictly inside every constraint and the objective
    /// domain.
    fn in_domain(&self, x: &DVector<f64>) -> bool;

    /// Writes the gradient and Hessian of `tau * f0(x) + phi(x)`.
    fn derivatives(&self, x: &DVector<f64>, tau: f64, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>);
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Stop when `m / tau` falls below this.
    pub gap_tolerance: f64,
    pub initial_tau: f64,
    pub tau_growth: f64,
    /// Centering stops once `decrement^2 / 2` is below this.
    pub newton_tolerance: f64,
    pub max_newton_steps: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-8,
            initial_tau: 1.0,
            tau_growth: 10.0,
            newton_tolerance: 1e-14,
            max_newton_steps: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierSolution {
    pub x: DVector<f64>,
    pub tau: f64,
    /// Duality-gap bound `m / tau` at the returned point.
    pub gap: f64,
    /// Newton decrement of the last centering step.
    pub decrement: f64,
    pub newton_steps: usize,
}

/// Solves `H d = -g` with a diagonally scaled Cholesky factorization,
/// falling back to a small Tikhonov shift if `H` is numerically singular.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let scale = DVector::from_iterator(n, (0..n).map(|i| {
        let d = hess[(i, i)];
        if d > 0.0 && d.is_finite() {
            1.0 / d.sqrt()
        } else {
            1.0
        }
    }));
    let mut scaled = hess.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= scale[i] * scale[j];
        }
    }
    let rhs = -grad.component_mul(&scale);
    let mut shift = 0.0;
    for _ in 0..8 {
        let mut m = scaled.clone();
        for i in 0..n {
            m[(i, i)] += shift;
        }
        if let Some(chol) = m.cholesky() {
            let y = chol.solve(&rhs);
            if y.iter().all(|v| v.is_finite()) {
                return Some(y.component_mul(&scale));
            }
        }
        shift = if shift == 0.0 { 1e-14 } else { shift * 100.0 };
    }
    None
}

/// Runs the barrier method from a strictly feasible `x0`.
pub fn minimize<P: BarrierProblem>(problem: &P, x0: DVector<f64>, options: &BarrierOptions) -> Result<BarrierSolution> {
    let n = problem.dimension();
    if x0.len() != n {
        return Err(Error::InvalidArgument(format!("start has {} entries, expected {n}", x0.len())));
    }
    if !problem.in_domain(&x0) {
        return Err(Error::InvalidArgument("barrier start point is not strictly feasible".into()));
    }
    let m = problem.barrier_parameter();
    let mut x = x0;
    let mut tau = options.initial_tau;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let mut steps = 0;
    let mut decrement = f64::INFINITY;

    loop {
        // centering
        let mut previous = f64::INFINITY;
        loop {
            if steps >= options.max_newton_steps {
                return Err(Error::SolverNonConvergence {
                    newton_steps: steps,
                    gap: m / tau,
                    decrement,
                });
            }
            problem.derivatives(&x, tau, &mut grad, &mut hess);
            let Some(dir) = newton_direction(&hess, &grad) else {
                return Err(Error::SolverNonConvergence {
                    newton_steps: steps,
                    gap: m / tau,
                    decrement,
                });
            };
            let dec_sq = -grad.dot(&dir);
            steps += 1;
            if !(dec_sq >= 0.0) {
                // numerically indefinite system; nothing more to gain at this tau
                break;
            }
            decrement = dec_sq.sqrt();
            if dec_sq / 2.0 <= options.newton_tolerance {
                break;
            }
            if decrement < STAGNATION_DECREMENT && decrement > 0.5 * previous {
                // quadratic convergence has stopped: rounding noise floor
                break;
            }
            previous = decrement;
            let mut step = if decrement > 0.25 { 1.0 / (1.0 + decrement) } else { 1.0 };
            let mut candidate = &x + &dir * step;
            let mut halvings = 0;
            while !problem.in_domain(&candidate) {
                step *= 0.5;
                halvings += 1;
                if halvings > 60 {
                    break;
                }
                candidate = &x + &dir * step;
            }
            if halvings > 60 || candidate == x {
                // stalled at machine precision
                break;
            }
            x = candidate;
        }
        if m / tau <= options.gap_tolerance {
            return Ok(BarrierSolution {
                x,
                tau,
                gap: m / tau,
                decrement,
                newton_steps: steps,
            });
        }
        tau *= options.tau_growth;
    }
}
