//! Optimizes two-layer LSFP weights on a synthetic three-cell scenario and
//! compares the result with the single-layer baselines.

use lsfp::baselines::{cpc_optimize, lpc_weights};
use lsfp::optimizer::{write_trace, LsfpOptimizer, WeightPattern};
use lsfp::se::{all_sinrs, log_product_sinr, max_power_ratio};
use lsfp::{ClosedFormStatistics, OptimizerOptions, ToyScenarioSpec};

fn main() -> lsfp::Result<()> {
    let scenario = ToyScenarioSpec::new(3, 2, 8).generate(7)?;
    let stats = ClosedFormStatistics::from_scenario(&scenario)?;
    let rho_d = 2.0;
    let options = OptimizerOptions::default();

    let optimizer = LsfpOptimizer::new(&stats, rho_d, WeightPattern::Full, options)?;
    let outcome = optimizer.run(optimizer.initialize()?)?;
    println!("LSFP from the equal-power point, {} subproblems:", outcome.iterations);
    write_trace(&outcome.trace, std::io::stdout().lock())?;

    let lpc = lpc_weights(&stats, rho_d)?;
    let cpc = cpc_optimize(&stats, rho_d, options)?;
    for (name, weights) in [("LSFP", &outcome.weights), ("CPC", &cpc.weights), ("LPC", &lpc)] {
        let sinr = all_sinrs(&stats, weights)?;
        println!(
            "{name:>4}: log prod SINR {:8.4}  max P_l/rho_d {:.10}",
            log_product_sinr(&sinr),
            max_power_ratio(weights, &stats, rho_d)
        );
    }
    let best = &outcome.state;
    let sinr = all_sinrs(&stats, &outcome.weights)?;
    for (i, (t, s)) in best.t.iter().zip(&sinr).enumerate() {
        println!("user {i}: surrogate t {t:.6e}  achieved SINR {s:.6e}");
    }
    Ok(())
}
