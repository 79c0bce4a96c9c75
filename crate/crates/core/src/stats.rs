//! Closed-form second-order statistics of the despread pilots and the
//! effective downlink channels.
//!
//! For user `(l, k)` and BS `r`, with `z_rk` the despread pilot at BS `r`:
//!
//! * `Psi_lk = E[z_lk z_lk^H] = tau_p eta sum_r (R_rk^l + gbar gbar^H) + sigma2 I`
//! * `b_lk^r = E[z_rk^H g_lk^r] = sqrt(tau_p eta) (|gbar_lk^r|^2 + tr R_lk^r)`
//! * `[C_lkk']_rn = E[z_rk'^H g_lk^r (g_lk^n)^H z_nk']`
//!
//! `C_lkk = D_lk + b_lk b_lk^H` with `D_lk` diagonal and non-negative, and
//! `C_lkk'` is diagonal for `k' != k`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::NetworkScenario;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, min_eigenvalue, quadratic_form, real_trace, trace_of_product, CMatrix, CVector};

/// `Psi_lk`, the covariance of the despread pilot of pilot `k` at BS `l`.
pub fn compute_psi(scenario: &NetworkScenario, l: usize, k: usize) -> Result<CMatrix> {
    scenario.check_user(l, k)?;
    let m = scenario.antennas();
    let scale = scenario.tau_p as f64 * scenario.eta;
    let mut psi = CMatrix::zeros(m, m);
    for r in 0..scenario.cells() {
        let link = scenario.link(r, k, l);
        psi += &link.covariance;
        psi += &link.gbar * link.gbar.adjoint();
    }
    psi *= Complex64::new(scale, 0.0);
    for i in 0..m {
        psi[(i, i)] += scenario.sigma2;
    }
    Ok(hermitian_part(&psi))
}

/// `b_lk`, the mean effective channel of user `(l, k)` from every BS.
pub fn compute_b(scenario: &NetworkScenario, l: usize, k: usize) -> Result<CVector> {
    scenario.check_user(l, k)?;
    let amp = scenario.pilot_amplitude();
    Ok(CVector::from_iterator(
        scenario.cells(),
        (0..scenario.cells()).map(|r| Complex64::new(amp * scenario.link(l, k, r).total_gain(), 0.0)),
    ))
}

/// `C_lkk'` given the precomputed `Psi` matrices (indexed `[r * K + k']`).
fn c_from_psi(scenario: &NetworkScenario, psi: &[CMatrix], l: usize, k: usize, k_prime: usize) -> CMatrix {
    let cells = scenario.cells();
    let users = scenario.users_per_cell();
    let scale = scenario.tau_p as f64 * scenario.eta;
    let amp = scenario.pilot_amplitude();
    let mut c = CMatrix::zeros(cells, cells);
    for r in 0..cells {
        let link = scenario.link(l, k, r);
        let p = &psi[r * users + k_prime];
        // tr(Psi (R + gbar gbar^H)) = tr(Psi R) + gbar^H Psi gbar
        let interference = trace_of_product(p, &link.covariance) + quadratic_form(p, &link.gbar);
        let diag = if k_prime == k {
            let tr_r = real_trace(&link.covariance);
            let los = link.gbar.norm_squared();
            scale * tr_r * tr_r + 2.0 * scale * los * tr_r + interference
        } else {
            interference
        };
        c[(r, r)] = Complex64::new(diag, 0.0);
    }
    if k_prime == k {
        let b: Vec<f64> = (0..cells).map(|r| amp * scenario.link(l, k, r).total_gain()).collect();
        for r in 0..cells {
            for n in 0..cells {
                if r != n {
                    c[(r, n)] = Complex64::new(b[r] * b[n], 0.0);
                }
            }
        }
    }
    c
}

/// `C_lkk'` for one triple. Recomputes the needed `Psi` matrices; use
/// [`ClosedFormStatistics::from_scenario`] when all triples are needed.
pub fn compute_c(scenario: &NetworkScenario, l: usize, k: usize, k_prime: usize) -> Result<CMatrix> {
    scenario.check_user(l, k)?;
    scenario.check_user(l, k_prime)?;
    let users = scenario.users_per_cell();
    let mut psi = vec![CMatrix::zeros(0, 0); scenario.cells() * users];
    for r in 0..scenario.cells() {
        psi[r * users + k_prime] = compute_psi(scenario, r, k_prime)?;
    }
    Ok(c_from_psi(scenario, &psi, l, k, k_prime))
}

/// All closed-form statistics of one scenario, computed once.
#[derive(Debug, Clone)]
pub struct ClosedFormStatistics {
    cells: usize,
    users_per_cell: usize,
    antennas: usize,
    pub tau_p: usize,
    pub eta: f64,
    pub sigma2: f64,
    psi: Vec<CMatrix>,
    psi_trace: Vec<f64>,
    b: Vec<CVector>,
    c: Vec<CMatrix>,
}

impl ClosedFormStatistics {
    pub fn from_scenario(scenario: &NetworkScenario) -> Result<Self> {
        let (cells, users) = (scenario.cells(), scenario.users_per_cell());
        let mut psi = Vec::with_capacity(cells * users);
        let mut b = Vec::with_capacity(cells * users);
        for l in 0..cells {
            for k in 0..users {
                psi.push(compute_psi(scenario, l, k)?);
                b.push(compute_b(scenario, l, k)?);
            }
        }
        let psi_trace = psi.iter().map(real_trace).collect();
        let mut c = Vec::with_capacity(cells * users * users);
        for l in 0..cells {
            for k in 0..users {
                for kp in 0..users {
                    c.push(c_from_psi(scenario, &psi, l, k, kp));
                }
            }
        }
        Ok(Self {
            cells,
            users_per_cell: users,
            antennas: scenario.antennas(),
            tau_p: scenario.tau_p,
            eta: scenario.eta,
            sigma2: scenario.sigma2,
            psi,
            psi_trace,
            b,
            c,
        })
    }

    /// Builds statistics directly from `b`, `C` and `tr(Psi)` values, without
    /// `Psi` matrices. Useful for synthetic optimizer inputs.
    ///
    /// `b[l * K + k]`, `c[(l * K + k) * K + k']`, `psi_trace[l * K + k]`.
    pub fn from_parts(
        cells: usize,
        users_per_cell: usize,
        sigma2: f64,
        psi_trace: Vec<f64>,
        b: Vec<CVector>,
        c: Vec<CMatrix>,
    ) -> Result<Self> {
        let n = cells * users_per_cell;
        if psi_trace.len() != n || b.len() != n || c.len() != n * users_per_cell {
            return Err(Error::InvalidArgument("statistics arrays do not match L and K".into()));
        }
        if b.iter().any(|v| v.len() != cells) || c.iter().any(|m| m.shape() != (cells, cells)) {
            return Err(Error::InvalidArgument("statistics entries must be L-dimensional".into()));
        }
        Ok(Self {
            cells,
            users_per_cell,
            antennas: 0,
            tau_p: users_per_cell,
            eta: 0.0,
            sigma2,
            psi: Vec::new(),
            psi_trace,
            b,
            c,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Total number of users `L * K`.
    pub fn user_count(&self) -> usize {
        self.cells * self.users_per_cell
    }

    fn index(&self, l: usize, k: usize) -> usize {
        l * self.users_per_cell + k
    }

    /// `Psi_lk`. Panics if the statistics were built without `Psi` matrices.
    pub fn psi(&self, l: usize, k: usize) -> &CMatrix {
        &self.psi[self.index(l, k)]
    }

    pub fn has_psi(&self) -> bool {
        !self.psi.is_empty()
    }

    pub fn psi_trace(&self, l: usize, k: usize) -> f64 {
        self.psi_trace[self.index(l, k)]
    }

    pub fn b(&self, l: usize, k: usize) -> &CVector {
        &self.b[self.index(l, k)]
    }

    pub fn c(&self, l: usize, k: usize, k_prime: usize) -> &CMatrix {
        &self.c[self.index(l, k) * self.users_per_cell + k_prime]
    }

    /// `C_lkk - b_lk b_lk^H`, the beamforming-uncertainty matrix.
    pub fn uncertainty_matrix(&self, l: usize, k: usize) -> CMatrix {
        let b = self.b(l, k);
        self.c(l, k, k) - b * b.adjoint()
    }

    /// Verifies the PSD structure the optimizer relies on: every
    /// `C_lkk - b_lk b_lk^H` has smallest eigenvalue at least
    /// `-1e-9 tr(C_lkk) / L`.
    pub fn check_convexity(&self) -> Result<()> {
        for l in 0..self.cells {
            for k in 0..self.users_per_cell {
                let d = self.uncertainty_matrix(l, k);
                let scale = real_trace(self.c(l, k, k)) / self.cells as f64;
                let min = min_eigenvalue(&d);
                if min < -1e-9 * scale {
                    return Err(Error::DegenerateStatistics(format!(
                        "C - b b^H for user ({l}, {k}) has eigenvalue {min:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Real parts of `b` as a plain vector; `b` is real by construction.
pub(crate) fn real_vector(v: &CVector) -> DVector<f64> {
    v.map(|z| z.re)
}

pub(crate) fn real_matrix(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}
