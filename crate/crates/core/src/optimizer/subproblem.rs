//! The convex program solved at each SCA iteration, in noise- and
//! power-normalized coordinates.
//!
//! Weights are rescaled per entry, `w_rk'^n = a_rk'^n sqrt(tr Psi_nk' / rho_d)`,
//! so each BS power constraint becomes `sum |w^n|^2 <= 1`. All SINR terms are
//! divided by `sigma2`. The SINR and interference surrogates are expressed
//! relative to the previous iterate: `t = t_prev * t_rel`, `u = u_prev * u_rel`.
//! With `gamma = t_prev u_prev / 2` the program for active users `p` is
//!
//! ```text
//! minimize   -sum log t_rel_p + lambda sum f_p
//! subject to q_p(w) + 1 <= u_prev_p u_rel_p + f_p
//!            s_p(w) >= sqrt(gamma_p (t_rel_p^2 + u_rel_p^2)),  s_p = b_p^T w_p
//!            f_p >= 0, u_rel_p > 0
//!            sum_{entries at BS n} w^2 <= 1
//! ```
//!
//! Since `b` and `C` are real, weights can be restricted to real values:
//! imaginary parts never help the SOC side and only add interference and
//! power.

use nalgebra::{DMatrix, DVector};

use super::barrier::BarrierProblem;

/// Shared, iteration-independent data.
#[derive(Debug, Clone)]
pub(crate) struct NormalizedProblem {
    /// Active (non-degenerate) users, as global indices `l * K + k`.
    pub active: Vec<usize>,
    /// Free BS entries of each active user.
    pub entries: Vec<Vec<usize>>,
    /// Offset of each active user's block inside `w`.
    pub offsets: Vec<usize>,
    pub weight_dim: usize,
    /// Normalized `b` restricted to free entries, per active user.
    pub b: Vec<DVector<f64>>,
    /// `quad[p][q]`: normalized `C_{l_p k_p k_q}` restricted to user `q`'s free
    /// entries, minus `b b^T` when `p == q`.
    pub quad: Vec<Vec<DMatrix<f64>>>,
    /// Indices into `w` of the entries transmitted by each BS.
    pub power_groups: Vec<Vec<usize>>,
    pub lambda: f64,
}

impl NormalizedProblem {
    pub fn users(&self) -> usize {
        self.active.len()
    }

    pub fn block<'a>(&self, w: &'a [f64], p: usize) -> &'a [f64] {
        &w[self.offsets[p]..self.offsets[p] + self.entries[p].len()]
    }

    /// `q_p(w)`: normalized interference of user `p` (without noise).
    pub fn interference(&self, w: &[f64], p: usize) -> f64 {
        let mut total = 0.0;
        for (q, m) in self.quad[p].iter().enumerate() {
            let x = self.block(w, q);
            for j in 0..x.len() {
                for i in 0..x.len() {
                    total += x[i] * m[(i, j)] * x[j];
                }
            }
        }
        total
    }

    pub fn signal(&self, w: &[f64], p: usize) -> f64 {
        self.block(w, p).iter().zip(self.b[p].iter()).map(|(x, b)| x * b).sum()
    }

    pub fn power_ratio(&self, w: &[f64], bs: usize) -> f64 {
        self.power_groups[bs].iter().map(|&i| w[i] * w[i]).sum()
    }
}

/// One SCA subproblem, linearized at `(t_prev, u_prev)`.
pub(crate) struct Subproblem<'a> {
    pub data: &'a NormalizedProblem,
    pub t_prev: Vec<f64>,
    pub u_prev: Vec<f64>,
}

impl Subproblem<'_> {
    fn t_index(&self, p: usize) -> usize {
        self.data.weight_dim + p
    }

    fn u_index(&self, p: usize) -> usize {
        self.data.weight_dim + self.data.users() + p
    }

    fn f_index(&self, p: usize) -> usize {
        self.data.weight_dim + 2 * self.data.users() + p
    }

    fn gamma(&self, p: usize) -> f64 {
        0.5 * self.t_prev[p] * self.u_prev[p]
    }

    fn interference_slack(&self, x: &[f64], p: usize) -> f64 {
        let w = &x[..self.data.weight_dim];
        self.u_prev[p] * x[self.u_index(p)] + x[self.f_index(p)] - 1.0 - self.data.interference(w, p)
    }

    fn cone_slack(&self, x: &[f64], p: usize) -> (f64, f64) {
        let s = self.data.signal(&x[..self.data.weight_dim], p);
        let (t, u) = (x[self.t_index(p)], x[self.u_index(p)]);
        (s, s * s / self.gamma(p) - t * t - u * u)
    }

    /// Strictly feasible start built from the previous weights `w_prev`,
    /// which must satisfy `s_p^2 >= t_prev u_prev` and unit power.
    pub fn start_point(&self, w_prev: &[f64]) -> DVector<f64> {
        const SHRINK: f64 = 0.999;
        let d = self.data;
        let n = self.dimension();
        let mut x = DVector::zeros(n);
        for (xi, wi) in x.iter_mut().zip(w_prev) {
            *xi = SHRINK * wi;
        }
        let t_rel = 0.99 * (2.0 * SHRINK * SHRINK - 1.0).sqrt();
        for p in 0..d.users() {
            x[self.t_index(p)] = t_rel;
            x[self.u_index(p)] = 1.0;
            let excess = d.interference(&x.as_slice()[..d.weight_dim], p) + 1.0 - self.u_prev[p];
            x[self.f_index(p)] = excess.max(0.0) + 1e-6 * self.u_prev[p].max(1.0);
        }
        x
    }
}

impl BarrierProblem for Subproblem<'_> {
    fn dimension(&self) -> usize {
        self.data.weight_dim + 3 * self.data.users()
    }

    fn barrier_parameter(&self) -> f64 {
        // interference + cone (2) + slack + u per user, one per BS
        (5 * self.data.users() + self.data.power_groups.len()) as f64
    }

    fn in_domain(&self, x: &DVector<f64>) -> bool {
        let d = self.data;
        let xs = x.as_slice();
        if xs.iter().any(|v| !v.is_finite()) {
            return false;
        }
        for p in 0..d.users() {
            if !(xs[self.t_index(p)] > 0.0 && xs[self.u_index(p)] > 0.0 && xs[self.f_index(p)] > 0.0) {
                return false;
            }
            if !(self.interference_slack(xs, p) > 0.0) {
                return false;
            }
            let (s, h) = self.cone_slack(xs, p);
            if !(s > 0.0 && h > 0.0) {
                return false;
            }
        }
        (0..d.power_groups.len()).all(|bs| d.power_ratio(&xs[..d.weight_dim], bs) < 1.0)
    }

    fn derivatives(&self, x: &DVector<f64>, tau: f64, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) {
        let d = self.data;
        let nw = d.weight_dim;
        let xs = x.as_slice();
        let w = &xs[..nw];
        grad.fill(0.0);
        hess.fill(0.0);

        // objective: -sum log t_rel + lambda sum f
        for p in 0..d.users() {
            let ti = self.t_index(p);
            grad[ti] -= tau / xs[ti];
            hess[(ti, ti)] += tau / (xs[ti] * xs[ti]);
            grad[self.f_index(p)] += tau * d.lambda;
        }

        // slack and u positivity
        for p in 0..d.users() {
            for idx in [self.f_index(p), self.u_index(p)] {
                grad[idx] -= 1.0 / xs[idx];
                hess[(idx, idx)] += 1.0 / (xs[idx] * xs[idx]);
            }
        }

        let mut dsigma = vec![0.0; nw];
        for p in 0..d.users() {
            // interference constraint, sigma = u_prev u + f - 1 - q(w)
            let sigma = self.interference_slack(xs, p);
            dsigma.iter_mut().for_each(|v| *v = 0.0);
            for (q, m) in d.quad[p].iter().enumerate() {
                let off = d.offsets[q];
                let xq = d.block(w, q);
                let len = xq.len();
                for i in 0..len {
                    let mut acc = 0.0;
                    for j in 0..len {
                        acc += m[(i, j)] * xq[j];
                    }
                    dsigma[off + i] = -2.0 * acc;
                }
                // -hess(sigma) / sigma = 2 M / sigma on the block
                for j in 0..len {
                    for i in 0..len {
                        hess[(off + i, off + j)] += 2.0 * m[(i, j)] / sigma;
                    }
                }
            }
            let (ui, fi) = (self.u_index(p), self.f_index(p));
            let du = self.u_prev[p];
            let inv = 1.0 / sigma;
            let inv2 = inv * inv;
            for i in 0..nw {
                grad[i] -= dsigma[i] * inv;
            }
            grad[ui] -= du * inv;
            grad[fi] -= inv;
            for j in 0..nw {
                let dj = dsigma[j] * inv2;
                if dj == 0.0 {
                    continue;
                }
                for i in 0..nw {
                    hess[(i, j)] += dsigma[i] * dj;
                }
            }
            for j in 0..nw {
                let v = dsigma[j] * inv2;
                hess[(ui, j)] += du * v;
                hess[(j, ui)] += du * v;
                hess[(fi, j)] += v;
                hess[(j, fi)] += v;
            }
            hess[(ui, ui)] += du * du * inv2;
            hess[(fi, fi)] += inv2;
            hess[(ui, fi)] += du * inv2;
            hess[(fi, ui)] += du * inv2;

            // cone constraint, h = s^2 / gamma - t^2 - u^2
            let gamma = self.gamma(p);
            let (s, h) = self.cone_slack(xs, p);
            let (ti, t, u) = (self.t_index(p), xs[self.t_index(p)], xs[ui]);
            let off = d.offsets[p];
            let b = &d.b[p];
            let len = b.len();
            let inv = 1.0 / h;
            let inv2 = inv * inv;
            // gradient of h: w_p -> 2 s b / gamma, t -> -2t, u -> -2u
            let gw = 2.0 * s / gamma;
            for i in 0..len {
                grad[off + i] -= gw * b[i] * inv;
            }
            grad[ti] += 2.0 * t * inv;
            grad[ui] += 2.0 * u * inv;
            // grad h grad h^T / h^2 - hess h / h
            let coef_ww = gw * gw * inv2 - 2.0 / gamma * inv;
            for j in 0..len {
                for i in 0..len {
                    hess[(off + i, off + j)] += coef_ww * b[i] * b[j];
                }
            }
            for i in 0..len {
                let cross_t = gw * b[i] * (-2.0 * t) * inv2;
                let cross_u = gw * b[i] * (-2.0 * u) * inv2;
                hess[(off + i, ti)] += cross_t;
                hess[(ti, off + i)] += cross_t;
                hess[(off + i, ui)] += cross_u;
                hess[(ui, off + i)] += cross_u;
            }
            hess[(ti, ti)] += 4.0 * t * t * inv2 + 2.0 * inv;
            hess[(ui, ui)] += 4.0 * u * u * inv2 + 2.0 * inv;
            hess[(ti, ui)] += 4.0 * t * u * inv2;
            hess[(ui, ti)] += 4.0 * t * u * inv2;
        }

        // per-BS power, sigma = 1 - sum w^2
        for group in &d.power_groups {
            let sigma = 1.0 - group.iter().map(|&i| w[i] * w[i]).sum::<f64>();
            let inv = 1.0 / sigma;
            for &i in group {
                grad[i] += 2.0 * w[i] * inv;
                hess[(i, i)] += 2.0 * inv;
                for &j in group {
                    hess[(i, j)] += 4.0 * w[i] * w[j] * inv * inv;
                }
            }
        }
    }
}
