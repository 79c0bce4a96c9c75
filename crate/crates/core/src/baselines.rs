//! Single-layer baselines: local statistical power control (LPC) and
//! cooperative max-product power control restricted to the serving BS (CPC).

use num_complex::Complex64;

use crate::config::OptimizerOptions;
use crate::error::{Error, Result};
use crate::optimizer::{LsfpOptimizer, OptimizationOutcome, WeightPattern};
use crate::se::PrecodingWeights;
use crate::stats::ClosedFormStatistics;

/// LPC: user `k` in cell `l` gets transmit power proportional to
/// `sqrt(tr Psi_lk)` and every BS spends exactly `rho_d`:
/// `a_lk^l = sqrt(rho_d / (sqrt(tr Psi_lk) * sum_k' sqrt(tr Psi_lk')))`.
pub fn lpc_weights(stats: &ClosedFormStatistics, rho_d: f64) -> Result<PrecodingWeights> {
    if !(rho_d > 0.0 && rho_d.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho_d must be positive, got {rho_d}")));
    }
    let (cells, users) = (stats.cells(), stats.users_per_cell());
    let mut w = PrecodingWeights::zeros(cells, users);
    for l in 0..cells {
        let mut roots = Vec::with_capacity(users);
        for k in 0..users {
            let tr = stats.psi_trace(l, k);
            if !(tr > 0.0) {
                return Err(Error::DegenerateStatistics(format!("tr(Psi) = {tr} for user ({l}, {k})")));
            }
            roots.push(tr.sqrt());
        }
        let total: f64 = roots.iter().sum();
        for (k, root) in roots.iter().enumerate() {
            w.a_mut(l, k)[l] = Complex64::new((rho_d / (root * total)).sqrt(), 0.0);
        }
    }
    Ok(w)
}

/// CPC optimization initialized at the LPC point, with the full trace.
pub fn cpc_optimize(stats: &ClosedFormStatistics, rho_d: f64, options: OptimizerOptions) -> Result<OptimizationOutcome> {
    let opt = LsfpOptimizer::new(stats, rho_d, WeightPattern::ServingOnly, options)?;
    let start = opt.state_from_weights(&lpc_weights(stats, rho_d)?)?;
    opt.run(start)
}

/// CPC weights: max-product-SINR power control where only `a_lk^l` may be
/// non-zero.
pub fn cpc_weights(stats: &ClosedFormStatistics, rho_d: f64, options: OptimizerOptions) -> Result<PrecodingWeights> {
    Ok(cpc_optimize(stats, rho_d, options)?.weights)
}
