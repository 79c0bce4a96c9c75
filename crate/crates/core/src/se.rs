//! Closed-form SINR and spectral efficiency for given LSFP weights.


use crate::error::{Error, Result};
use crate::linalg::{quadratic_form, CVector};
use crate::stats::ClosedFormStatistics;

/// LSFP coefficients. `a(l, k)[r]` is the weight `a_lk^r` applied at BS `r`
/// to the symbol of user `k` in cell `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingWeights {
    cells: usize,
    users_per_cell: usize,
    a: Vec<CVector>,
}

impl PrecodingWeights {
    pub fn zeros(cells: usize, users_per_cell: usize) -> Self {
        Self {
            cells,
            users_per_cell,
            a: vec![CVector::zeros(cells); cells * users_per_cell],
        }
    }

    /// Builds weights from per-user vectors in row-major `[l][k]` order.
    pub fn from_vectors(cells: usize, users_per_cell: usize, a: Vec<CVector>) -> Result<Self> {
        if a.len() != cells * users_per_cell || a.iter().any(|v| v.len() != cells) {
            return Err(Error::InvalidArgument("weight vectors do not match L and K".into()));
        }
        if a.iter().flat_map(|v| v.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        Ok(Self { cells, users_per_cell, a })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn a(&self, l: usize, k: usize) -> &CVector {
        &self.a[l * self.users_per_cell + k]
    }

    pub fn a_mut(&mut self, l: usize, k: usize) -> &mut CVector {
        &mut self.a[l * self.users_per_cell + k]
    }

    /// Number of entries that are exactly zero.
    pub fn zero_count(&self) -> usize {
        self.a
            .iter()
            .flat_map(|v| v.iter())
            .filter(|z| z.re == 0.0 && z.im == 0.0)
            .count()
    }

    /// True when only the serving-BS entry of every user is non-zero.
    pub fn is_serving_only(&self) -> bool {
        (0..self.cells).all(|l| {
            (0..self.users_per_cell).all(|k| {
                self.a(l, k)
                    .iter()
                    .enumerate()
                    .all(|(r, z)| r == l || (z.re == 0.0 && z.im == 0.0))
            })
        })
    }

    fn check_dims(&self, stats: &ClosedFormStatistics) -> Result<()> {
        if self.cells != stats.cells() || self.users_per_cell != stats.users_per_cell() {
            return Err(Error::InvalidArgument(format!(
                "weights are {}x{} but statistics are {}x{}",
                self.cells,
                self.users_per_cell,
                stats.cells(),
                stats.users_per_cell()
            )));
        }
        Ok(())
    }
}

/// Numerator and denominator of the closed-form SINR of user `(l, k)`.
///
/// Denominator: `sum_r a_rk^H C_lkk a_rk - |a_lk^H b_lk|^2
///   + sum_r sum_{k' != k} a_rk'^H C_lkk' a_rk' + sigma2`.
pub fn sinr_terms(stats: &ClosedFormStatistics, weights: &PrecodingWeights, l: usize, k: usize) -> Result<(f64, f64)> {
    weights.check_dims(stats)?;
    if l >= stats.cells() || k >= stats.users_per_cell() {
        return Err(Error::IndexOutOfRange {
            what: "user",
            index: l * stats.users_per_cell() + k,
            limit: stats.user_count(),
        });
    }
    let desired = weights.a(l, k).dotc(stats.b(l, k)).norm_sqr();
    let mut interference = -desired;
    for r in 0..stats.cells() {
        for kp in 0..stats.users_per_cell() {
            interference += quadratic_form(stats.c(l, k, kp), weights.a(r, kp));
        }
    }
    Ok((desired, interference + stats.sigma2))
}

/// Closed-form SINR of user `(l, k)`.
pub fn sinr_closed_form(stats: &ClosedFormStatistics, weights: &PrecodingWeights, l: usize, k: usize) -> Result<f64> {
    let (num, den) = sinr_terms(stats, weights, l, k)?;
    let sinr = if num == 0.0 { 0.0 } else { num / den };
    if !sinr.is_finite() || sinr < 0.0 {
        return Err(Error::NonFiniteSinr { l, k });
    }
    Ok(sinr)
}

/// Closed-form SINR of every user, row-major `[l][k]`.
pub fn all_sinrs(stats: &ClosedFormStatistics, weights: &PrecodingWeights) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(stats.user_count());
    for l in 0..stats.cells() {
        for k in 0..stats.users_per_cell() {
            out.push(sinr_closed_form(stats, weights, l, k)?);
        }
    }
    Ok(out)
}

/// `sum log SINR`, the log of the product objective.
pub fn log_product_sinr(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|s| s.ln()).sum()
}

/// `(1 - tau_p / tau_c) log2(1 + sinr)` in bit/s/Hz.
pub fn spectral_efficiency(sinr: f64, tau_p: usize, tau_c: usize) -> f64 {
    (1.0 - tau_p as f64 / tau_c as f64) * (1.0 + sinr).log2()
}

/// Long-term transmit power of BS `l`:
/// `P_l = sum_k tr(Psi_lk) sum_r |a_rk^l|^2`.
pub fn bs_power(weights: &PrecodingWeights, stats: &ClosedFormStatistics, l: usize) -> f64 {
    (0..stats.users_per_cell())
        .map(|k| {
            let per_pilot: f64 = (0..stats.cells()).map(|r| weights.a(r, k)[l].norm_sqr()).sum();
            stats.psi_trace(l, k) * per_pilot
        })
        .sum()
}

/// Largest `P_l / rho_d` over all BSs.
pub fn max_power_ratio(weights: &PrecodingWeights, stats: &ClosedFormStatistics, rho_d: f64) -> f64 {
    (0..stats.cells())
        .map(|l| bs_power(weights, stats, l) / rho_d)
        .fold(0.0, f64::max)
}

/// Rotates every `a_lk` so that `a_lk^H b_lk` is real and non-negative.
pub fn align_phases(weights: &mut PrecodingWeights, stats: &ClosedFormStatistics) {
    for l in 0..stats.cells() {
        for k in 0..stats.users_per_cell() {
            let inner = weights.a(l, k).dotc(stats.b(l, k));
            if inner.norm() > 0.0 {
                // a^H b = |.| e^{j phi}; multiply a by e^{j phi} so that (e^{j phi} a)^H b = |.|
                let rot = inner / inner.norm();
                let a = weights.a_mut(l, k);
                *a *= rot;
            }
        }
    }
}

/// Per-user SINR and SE for one scheme on one setup.
#[derive(Debug, Clone, PartialEq)]
pub struct SeResult {
    pub scheme: String,
    pub setup: usize,
    pub cells: usize,
    pub users_per_cell: usize,
    /// Row-major `[l][k]`.
    pub sinr: Vec<f64>,
    pub se: Vec<f64>,
}

impl SeResult {
    pub fn evaluate(
        scheme: impl Into<String>,
        setup: usize,
        stats: &ClosedFormStatistics,
        weights: &PrecodingWeights,
        tau_c: usize,
    ) -> Result<Self> {
        let sinr = all_sinrs(stats, weights)?;
        let se = sinr.iter().map(|&s| spectral_efficiency(s, stats.tau_p, tau_c)).collect();
        Ok(Self {
            scheme: scheme.into(),
            setup,
            cells: stats.cells(),
            users_per_cell: stats.users_per_cell(),
            sinr,
            se,
        })
    }

    pub fn sinr_at(&self, l: usize, k: usize) -> f64 {
        self.sinr[l * self.users_per_cell + k]
    }

    pub fn se_at(&self, l: usize, k: usize) -> f64 {
        self.se[l * self.users_per_cell + k]
    }

    pub fn product_sinr(&self) -> f64 {
        self.sinr.iter().product()
    }

    /// Sum SE of each cell.
    pub fn sum_se_per_cell(&self) -> Vec<f64> {
        self.se
            .chunks(self.users_per_cell.max(1))
            .map(|c| c.iter().sum())
            .collect()
    }
}
