//! Compares the closed-form SINR of LPC weights against a Monte Carlo
//! estimate over independent coherence blocks.

use lsfp::baselines::lpc_weights;
use lsfp::harness::verify_weights;
use lsfp::montecarlo::{estimate, MonteCarloOptions};
use lsfp::{generate_scenario, ClosedFormStatistics, SimulationConfig};

fn main() -> lsfp::Result<()> {
    let config = SimulationConfig {
        cells: 2,
        users_per_cell: 2,
        antennas: 16,
        ..SimulationConfig::default()
    };
    let scenario = generate_scenario(&config, 1)?;
    let stats = ClosedFormStatistics::from_scenario(&scenario)?;
    let weights = lpc_weights(&stats, config.rho_d)?;

    let blocks = 100_000;
    let pairs = verify_weights(&scenario, &stats, &weights, blocks, 3, config.tau_c)?;
    println!("{blocks} blocks");
    for (i, (cf, mc)) in pairs.iter().enumerate() {
        println!("user {i}: closed form {cf:10.4}  Monte Carlo {mc:10.4}  gap {:.2}%", 100.0 * (mc / cf - 1.0).abs());
    }

    let est = estimate(&scenario, None, MonteCarloOptions { blocks, seed: 4, estimate_psi: false })?;
    let (exact, sample) = (stats.c(0, 0, 0), est.c(0, 0, 0));
    println!("C_000 closed form:\n{:.4e}", exact.map(|z| z.re));
    println!("C_000 sample mean:\n{:.4e}", sample.map(|z| z.re));
    Ok(())
}
