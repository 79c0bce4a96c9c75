//! Max-product-SINR LSFP design by feasible-point-pursuit successive convex
//! approximation.
//!
//! The nonconvex problem `max prod SINR_lk s.t. P_l <= rho_d` is lifted with
//! SINR variables `t` and interference-plus-noise variables `u`. The bilinear
//! constraint `(Re a^H b)^2 >= t u` is tightened at every iteration with the
//! convex upper bound `(u'/2t') t^2 + (t'/2u') u^2 >= t u`, and the
//! interference constraints receive penalized slacks `f` so each subproblem
//! is feasible. The subproblem maximizes `sum log t - lambda sum f`.

pub mod barrier;
mod subproblem;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::config::OptimizerOptions;
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::se::{align_phases, all_sinrs, log_product_sinr, max_power_ratio, sinr_terms, PrecodingWeights};
use crate::stats::{real_matrix, real_vector, ClosedFormStatistics};

use barrier::{minimize, BarrierOptions};
use subproblem::{NormalizedProblem, Subproblem};

pub use crate::se::bs_power;

/// Which LSFP coefficients are free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightPattern {
    /// Two-layer LSFP: every `a_lk^r` is free.
    Full,
    /// Single-layer precoding: only `a_lk^l` (serving BS) is non-zero.
    ServingOnly,
}

impl WeightPattern {
    fn entries(self, cells: usize, l: usize) -> Vec<usize> {
        match self {
            WeightPattern::Full => (0..cells).collect(),
            WeightPattern::ServingOnly => vec![l],
        }
    }
}

/// Iterate of the SCA loop.
///
/// `t` is the SINR surrogate, `u` the interference-plus-noise surrogate and
/// `f` the feasibility slack, all per user in row-major `[l][k]` order. `u`
/// and `f` are expressed in units of the noise power. Users with vanishing
/// mean channel are excluded from the objective and carry `t = 0`.
#[derive(Debug, Clone)]
pub struct ScaState {
    pub weights: PrecodingWeights,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    /// `sum log t - lambda sum f` over active users.
    pub objective: f64,
    pub iteration: usize,
    /// Duality-gap bound of the subproblem that produced this state.
    pub solver_gap: f64,
    pub newton_steps: usize,
}

impl ScaState {
    pub fn max_slack(&self) -> f64 {
        self.f.iter().cloned().fold(0.0, f64::max)
    }
}

/// One line of the optimizer trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub max_slack: f64,
    pub max_power_ratio: f64,
}

/// Writes trace records as newline-delimited `key=value` lines.
pub fn write_trace<W: Write>(records: &[IterationRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        writeln!(
            out,
            "iteration={} objective={:.17e} max_slack={:.17e} max_power_ratio={:.17e}",
            r.iteration, r.objective, r.max_slack, r.max_power_ratio
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct OptimizationOutcome {
    /// Best weights found (largest closed-form product SINR among accepted
    /// iterates).
    pub weights: PrecodingWeights,
    /// State that produced `weights`.
    pub state: ScaState,
    /// One record per accepted iterate, starting with the initial point.
    pub trace: Vec<IterationRecord>,
    /// Number of subproblems solved.
    pub iterations: usize,
    /// True when the relative objective change fell below the tolerance.
    pub converged: bool,
}

impl OptimizationOutcome {
    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }
}

/// FPP-SCA optimizer bound to one set of statistics.
#[derive(Debug, Clone)]
pub struct LsfpOptimizer<'a> {
    stats: &'a ClosedFormStatistics,
    rho_d: f64,
    pattern: WeightPattern,
    options: OptimizerOptions,
    data: NormalizedProblem,
    /// `sqrt(rho_d / tr Psi_nk)` at `[n * K + k]`.
    entry_scale: Vec<f64>,
}

impl<'a> LsfpOptimizer<'a> {
    pub fn new(
        stats: &'a ClosedFormStatistics,
        rho_d: f64,
        pattern: WeightPattern,
        options: OptimizerOptions,
    ) -> Result<Self> {
        options.validate()?;
        if !(rho_d > 0.0 && rho_d.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho_d must be positive, got {rho_d}")));
        }
        if !(stats.sigma2 > 0.0) {
            return Err(Error::DegenerateStatistics("noise power must be positive".into()));
        }
        stats.check_convexity()?;
        let (cells, users) = (stats.cells(), stats.users_per_cell());
        let mut entry_scale = Vec::with_capacity(cells * users);
        for n in 0..cells {
            for k in 0..users {
                let tr = stats.psi_trace(n, k);
                if !(tr > 0.0) {
                    return Err(Error::DegenerateStatistics(format!("tr(Psi) = {tr} for BS {n}, pilot {k}")));
                }
                entry_scale.push((rho_d / tr).sqrt());
            }
        }
        let noise_amp = stats.sigma2.sqrt();
        let scale = |n: usize, k: usize| entry_scale[n * users + k];

        // normalized b on each user's free entries
        let mut candidates = Vec::new();
        let mut max_norm: f64 = 0.0;
        for l in 0..cells {
            for k in 0..users {
                let entries = pattern.entries(cells, l);
                let b = real_vector(stats.b(l, k));
                let bn = DVector::from_iterator(entries.len(), entries.iter().map(|&n| b[n] * scale(n, k) / noise_amp));
                max_norm = max_norm.max(bn.norm());
                candidates.push((l * users + k, entries, bn));
            }
        }
        let mut active = Vec::new();
        let mut entries = Vec::new();
        let mut bvecs = Vec::new();
        for (i, e, b) in candidates {
            if b.norm() > 1e-12 * max_norm && b.norm() > 0.0 {
                active.push(i);
                entries.push(e);
                bvecs.push(b);
            }
        }
        let mut offsets = Vec::with_capacity(active.len());
        let mut weight_dim = 0;
        for e in &entries {
            offsets.push(weight_dim);
            weight_dim += e.len();
        }
        let mut quad = Vec::with_capacity(active.len());
        for (p, &i) in active.iter().enumerate() {
            let (l, k) = (i / users, i % users);
            let mut row = Vec::with_capacity(active.len());
            for (q, &j) in active.iter().enumerate() {
                let kq = j % users;
                let c = real_matrix(stats.c(l, k, kq));
                let e = &entries[q];
                let mut m = DMatrix::from_fn(e.len(), e.len(), |a, b| {
                    c[(e[a], e[b])] * scale(e[a], kq) * scale(e[b], kq) / stats.sigma2
                });
                if p == q {
                    let bb = &bvecs[p];
                    m -= bb * bb.transpose();
                }
                row.push(m);
            }
            quad.push(row);
        }
        let mut power_groups = vec![Vec::new(); cells];
        for (q, e) in entries.iter().enumerate() {
            for (pos, &n) in e.iter().enumerate() {
                power_groups[n].push(offsets[q] + pos);
            }
        }
        let lambda = options.penalty(cells * users);
        Ok(Self {
            stats,
            rho_d,
            pattern,
            options,
            data: NormalizedProblem {
                active,
                entries,
                offsets,
                weight_dim,
                b: bvecs,
                quad,
                power_groups,
                lambda,
            },
            entry_scale,
        })
    }

    pub fn pattern(&self) -> WeightPattern {
        self.pattern
    }

    pub fn lambda(&self) -> f64 {
        self.data.lambda
    }

    /// Global indices `l * K + k` of the users that enter the objective.
    pub fn active_users(&self) -> &[usize] {
        &self.data.active
    }

    fn users(&self) -> usize {
        self.stats.users_per_cell()
    }

    fn scale(&self, n: usize, k: usize) -> f64 {
        self.entry_scale[n * self.users() + k]
    }

    fn to_normalized(&self, weights: &PrecodingWeights) -> Vec<f64> {
        let users = self.users();
        let mut w = vec![0.0; self.data.weight_dim];
        for (p, &i) in self.data.active.iter().enumerate() {
            let (l, k) = (i / users, i % users);
            for (pos, &n) in self.data.entries[p].iter().enumerate() {
                w[self.data.offsets[p] + pos] = weights.a(l, k)[n].re / self.scale(n, k);
            }
        }
        w
    }

    fn weights_from_normalized(&self, w: &[f64]) -> PrecodingWeights {
        let users = self.users();
        let mut out = PrecodingWeights::zeros(self.stats.cells(), users);
        for (p, &i) in self.data.active.iter().enumerate() {
            let (l, k) = (i / users, i % users);
            for (pos, &n) in self.data.entries[p].iter().enumerate() {
                out.a_mut(l, k)[n] = Complex64::new(w[self.data.offsets[p] + pos] * self.scale(n, k), 0.0);
            }
        }
        out
    }

    /// Equal-power single-layer point: `a_lk^l = sqrt(rho_d / (K tr Psi_lk))`,
    /// every BS at full power.
    pub fn initialize(&self) -> Result<ScaState> {
        self.state_from_weights(&equal_power_weights(self.stats, self.rho_d)?)
    }

    /// Turns arbitrary weights into a feasible SCA state: phases are aligned
    /// so `a_lk^H b_lk >= 0`, imaginary parts are dropped (neither step lowers
    /// any SINR), degenerate users are zeroed, and `t`, `u` are set to the
    /// achieved SINR and interference-plus-noise.
    pub fn state_from_weights(&self, weights: &PrecodingWeights) -> Result<ScaState> {
        let (cells, users) = (self.stats.cells(), self.users());
        if weights.cells() != cells || weights.users_per_cell() != users {
            return Err(Error::InvalidArgument("initial weights do not match the statistics".into()));
        }
        if self.pattern == WeightPattern::ServingOnly && !weights.is_serving_only() {
            return Err(Error::InvalidArgument("serving-only optimization needs serving-only initial weights".into()));
        }
        let mut aligned = weights.clone();
        align_phases(&mut aligned, self.stats);
        let mut projected = PrecodingWeights::zeros(cells, users);
        for &i in &self.data.active {
            let (l, k) = (i / users, i % users);
            let a = CVector::from_iterator(cells, aligned.a(l, k).iter().map(|z| Complex64::new(z.re, 0.0)));
            *projected.a_mut(l, k) = a;
        }
        let ratio = max_power_ratio(&projected, self.stats, self.rho_d);
        if ratio > 1.0 + 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "initial weights exceed the per-BS power budget by a factor {ratio}"
            )));
        }
        if ratio > 1.0 {
            let s = Complex64::new(ratio.sqrt().recip(), 0.0);
            for l in 0..cells {
                for k in 0..users {
                    *projected.a_mut(l, k) *= s;
                }
            }
        }
        let n = cells * users;
        let mut t = vec![0.0; n];
        let mut u = vec![0.0; n];
        for l in 0..cells {
            for k in 0..users {
                let (num, den) = sinr_terms(self.stats, &projected, l, k)?;
                t[l * users + k] = num / den;
                u[l * users + k] = den / self.stats.sigma2;
            }
        }
        let mut objective = 0.0;
        for &i in &self.data.active {
            if !(t[i] > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "initial weights give zero SINR to user ({}, {})",
                    i / users,
                    i % users
                )));
            }
            objective += t[i].ln();
        }
        Ok(ScaState {
            weights: projected,
            t,
            u,
            f: vec![0.0; n],
            objective,
            iteration: 0,
            solver_gap: 0.0,
            newton_steps: 0,
        })
    }

    /// Solves the convex subproblem linearized at `state`.
    pub fn solve_subproblem(&self, state: &ScaState) -> Result<ScaState> {
        let users = self.users();
        let d = &self.data;
        let t_prev: Vec<f64> = d.active.iter().map(|&i| state.t[i]).collect();
        let u_prev: Vec<f64> = d.active.iter().map(|&i| state.u[i]).collect();
        if t_prev.iter().chain(&u_prev).any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument("previous t and u must be positive".into()));
        }
        let sub = Subproblem {
            data: d,
            t_prev: t_prev.clone(),
            u_prev: u_prev.clone(),
        };
        let w_prev = self.to_normalized(&state.weights);
        let x0 = sub.start_point(&w_prev);
        let options = BarrierOptions {
            gap_tolerance: self.options.kkt_tol,
            ..BarrierOptions::default()
        };
        let sol = minimize(&sub, x0, &options)?;
        let x = sol.x.as_slice();
        let nw = d.weight_dim;
        let np = d.users();

        let mut weights = self.weights_from_normalized(&x[..nw]);
        align_phases(&mut weights, self.stats);
        let n = self.stats.user_count();
        let mut t = vec![0.0; n];
        let mut u = vec![0.0; n];
        let mut f = vec![0.0; n];
        let mut objective = 0.0;
        for (p, &i) in d.active.iter().enumerate() {
            t[i] = t_prev[p] * x[nw + p];
            u[i] = u_prev[p] * x[nw + np + p];
            f[i] = x[nw + 2 * np + p];
            objective += t[i].ln() - d.lambda * f[i];
        }
        // inactive users: record achieved interference, no surrogate
        for (i, ui) in u.iter_mut().enumerate() {
            if !d.active.contains(&i) {
                let (_, den) = sinr_terms(self.stats, &weights, i / users, i % users)?;
                *ui = den / self.stats.sigma2;
            }
        }
        Ok(ScaState {
            weights,
            t,
            u,
            f,
            objective,
            iteration: state.iteration + 1,
            solver_gap: sol.gap,
            newton_steps: sol.newton_steps,
        })
    }

    fn record(&self, state: &ScaState) -> IterationRecord {
        IterationRecord {
            iteration: state.iteration,
            objective: state.objective,
            max_slack: state.max_slack(),
            max_power_ratio: max_power_ratio(&state.weights, self.stats, self.rho_d),
        }
    }

    fn closed_form_score(&self, weights: &PrecodingWeights) -> Result<f64> {
        let sinrs = all_sinrs(self.stats, weights)?;
        Ok(self.data.active.iter().map(|&i| sinrs[i].ln()).sum())
    }

    /// Iterates from `initial` until the relative objective improvement
    /// drops below the tolerance or the iteration cap is reached. A
    /// subproblem whose objective falls below the current one is rejected
    /// and ends the loop.
    pub fn run(&self, initial: ScaState) -> Result<OptimizationOutcome> {
        let mut trace = vec![self.record(&initial)];
        let mut best_score = self.closed_form_score(&initial.weights)?;
        let mut best = initial.clone();
        let mut current = initial;
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..self.options.max_iters {
            let next = self.solve_subproblem(&current).map_err(|e| Error::Iteration {
                iteration: current.iteration + 1,
                source: Box::new(e),
            })?;
            iterations += 1;
            let improvement = next.objective - current.objective;
            if improvement < 0.0 {
                converged = true;
                break;
            }
            let threshold = self.options.tol * current.objective.abs().max(1.0);
            current = next;
            trace.push(self.record(&current));
            let score = self.closed_form_score(&current.weights)?;
            if score >= best_score {
                best_score = score;
                best = current.clone();
            }
            if improvement <= threshold {
                converged = true;
                break;
            }
        }
        Ok(OptimizationOutcome {
            weights: best.weights.clone(),
            state: best,
            trace,
            iterations,
            converged,
        })
    }
}

/// `a_lk^l = sqrt(rho_d / (K tr Psi_lk))`, other entries zero.
pub fn equal_power_weights(stats: &ClosedFormStatistics, rho_d: f64) -> Result<PrecodingWeights> {
    let (cells, users) = (stats.cells(), stats.users_per_cell());
    let mut w = PrecodingWeights::zeros(cells, users);
    for l in 0..cells {
        for k in 0..users {
            let tr = stats.psi_trace(l, k);
            if !(tr > 0.0) {
                return Err(Error::DegenerateStatistics(format!("tr(Psi) = {tr} for user ({l}, {k})")));
            }
            w.a_mut(l, k)[l] = Complex64::new((rho_d / (users as f64 * tr)).sqrt(), 0.0);
        }
    }
    Ok(w)
}

/// Equal-power initial state for full LSFP optimization with default options.
pub fn initialize(stats: &ClosedFormStatistics, rho_d: f64) -> Result<ScaState> {
    LsfpOptimizer::new(stats, rho_d, WeightPattern::Full, OptimizerOptions::default())?.initialize()
}

/// Solves one subproblem of the full LSFP problem.
pub fn solve_subproblem(
    state: &ScaState,
    stats: &ClosedFormStatistics,
    rho_d: f64,
    options: OptimizerOptions,
) -> Result<ScaState> {
    LsfpOptimizer::new(stats, rho_d, WeightPattern::Full, options)?.solve_subproblem(state)
}

/// Full two-layer LSFP from the equal-power initial point.
pub fn optimize_lsfp(stats: &ClosedFormStatistics, rho_d: f64, options: OptimizerOptions) -> Result<OptimizationOutcome> {
    let opt = LsfpOptimizer::new(stats, rho_d, WeightPattern::Full, options)?;
    opt.run(opt.initialize()?)
}

/// Full two-layer LSFP warm-started from `initial` (e.g. the CPC solution).
pub fn optimize_lsfp_from(
    stats: &ClosedFormStatistics,
    rho_d: f64,
    initial: &PrecodingWeights,
    options: OptimizerOptions,
) -> Result<OptimizationOutcome> {
    let opt = LsfpOptimizer::new(stats, rho_d, WeightPattern::Full, options)?;
    opt.run(opt.state_from_weights(initial)?)
}

/// `sum log SINR` of `weights`.
pub fn log_product(stats: &ClosedFormStatistics, weights: &PrecodingWeights) -> Result<f64> {
    Ok(log_product_sinr(&all_sinrs(stats, weights)?))
}
