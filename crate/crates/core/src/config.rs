//! Simulation and optimizer configuration.
//!
//! The JSON document uses the short field names below (`L`, `K`, `M`, ...).
//! Every field is optional; missing fields take the reference network values
//! (4 cells of 150 m x 150 m, 200 antennas, 6 users per cell).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noise power of -96 dBm expressed in watts.
pub const DEFAULT_NOISE_POWER_W: f64 = 2.511_886_431_509_582e-13;

/// Knobs for the successive convex approximation loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerOptions {
    /// Penalty on the feasibility slacks. `None` selects `1e3 * L * K`.
    pub lambda: Option<f64>,
    /// Maximum number of outer SCA iterations.
    pub max_iters: usize,
    /// Relative objective improvement below which the SCA loop stops.
    pub tol: f64,
    /// Largest slack (in units of the noise power) accepted at termination.
    pub slack_tol: f64,
    /// Duality-gap target of the inner barrier solver.
    pub kkt_tol: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            lambda: None,
            max_iters: 50,
            tol: 1e-4,
            slack_tol: 1e-8,
            kkt_tol: 1e-8,
        }
    }
}

impl OptimizerOptions {
    pub fn penalty(&self, users: usize) -> f64 {
        self.lambda.unwrap_or(1e3 * users as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(lambda) = self.lambda {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        for (name, v) in [("tol", self.tol), ("slack_tol", self.slack_tol), ("kkt_tol", self.kkt_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Number of cells.
    #[serde(rename = "L")]
    pub cells: usize,
    /// Users per cell.
    #[serde(rename = "K")]
    pub users_per_cell: usize,
    /// Antennas per base station.
    #[serde(rename = "M")]
    pub antennas: usize,
    /// Side length of each square cell, meters.
    pub cell_side: f64,
    /// Minimum distance between any user and any base station, meters.
    pub min_bs_distance: f64,
    /// Uplink pilot power, W.
    pub eta: f64,
    /// Maximum downlink power per base station, W.
    pub rho_d: f64,
    /// Noise power, W.
    pub sigma2: f64,
    /// Pilot length in samples. Must equal `K` when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_p: Option<usize>,
    /// Coherence block length in samples.
    pub tau_c: usize,
    pub seed: u64,
    /// Coherence blocks used by Monte Carlo verification.
    pub mc_realizations: usize,
    /// Number of independent user drops.
    pub n_setups: usize,
    /// Number of setups checked by Monte Carlo verification.
    pub verify_setups: usize,
    /// Users-per-cell values swept by `run_sweep` when none are given.
    pub k_values: Vec<usize>,
    pub optimizer: OptimizerOptions,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            cells: 4,
            users_per_cell: 6,
            antennas: 200,
            cell_side: 150.0,
            min_bs_distance: 20.0,
            eta: 0.05,
            rho_d: 2.0,
            sigma2: DEFAULT_NOISE_POWER_W,
            tau_p: None,
            tau_c: 200,
            seed: 1,
            mc_realizations: 200,
            n_setups: 100,
            verify_setups: 10,
            k_values: vec![2, 4, 6, 8, 10],
            optimizer: OptimizerOptions::default(),
        }
    }
}

impl SimulationConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Pilot length; every cell reuses the same `K` orthogonal pilots.
    pub fn pilot_length(&self) -> usize {
        self.tau_p.unwrap_or(self.users_per_cell)
    }

    /// Copy of this configuration with a different number of users per cell.
    pub fn with_users_per_cell(&self, k: usize) -> Self {
        Self {
            users_per_cell: k,
            tau_p: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.cells == 0 {
            return bad("L must be at least 1".into());
        }
        if self.antennas == 0 {
            return bad("M must be at least 1".into());
        }
        if let Some(tp) = self.tau_p {
            if tp != self.users_per_cell {
                return bad(format!("tau_p ({tp}) must equal K ({})", self.users_per_cell));
            }
        }
        if self.pilot_length() >= self.tau_c {
            return bad(format!(
                "tau_p ({}) must be smaller than tau_c ({})",
                self.pilot_length(),
                self.tau_c
            ));
        }
        for (name, v) in [
            ("eta", self.eta),
            ("rho_d", self.rho_d),
            ("sigma2", self.sigma2),
            ("cell_side", self.cell_side),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.min_bs_distance >= 0.0 && self.min_bs_distance.is_finite()) {
            return bad(format!("min_bs_distance must be non-negative, got {}", self.min_bs_distance));
        }
        if self.k_values.iter().any(|&k| k + 1 > self.tau_c) {
            return bad("every swept K must stay below tau_c".into());
        }
        self.optimizer.validate()
    }
}
