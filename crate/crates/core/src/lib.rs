//! Two-layer large-scale fading precoding (LSFP) for multi-cell massive MIMO
//! downlink under spatially correlated Rician fading with random LOS phase
//! shifts.
//!
//! The pipeline is: [`channel`] drops users and builds per-link statistics,
//! [`stats`] turns them into the closed-form moments `Psi`, `b`, `C`, [`se`]
//! evaluates the spectral-efficiency lower bound for any LSFP weights,
//! [`optimizer`] maximizes the product of SINRs, [`baselines`] provides the
//! single-layer LPC and CPC references, [`montecarlo`] checks the closed form
//! by simulation, and [`harness`] runs and persists whole experiments.

// NaN must fail positivity checks, hence `!(x > 0.0)` throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod montecarlo;
pub mod optimizer;
pub mod se;
pub mod stats;

pub use baselines::{cpc_weights, lpc_weights};
pub use channel::{generate_scenario, NetworkScenario, ToyScenarioSpec};
pub use config::{OptimizerOptions, SimulationConfig};
pub use error::{Error, Result};
pub use harness::{run_sweep, run_verification, write_results, ExperimentResult, Scheme};
pub use optimizer::{optimize_lsfp, optimize_lsfp_from, LsfpOptimizer, WeightPattern};
pub use se::{sinr_closed_form, spectral_efficiency, PrecodingWeights, SeResult};
pub use stats::ClosedFormStatistics;
