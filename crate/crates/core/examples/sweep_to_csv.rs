//! Small sweep over K written to CSV with its JSON sidecar, then read back
//! to compute the per-scheme averages and medians.

use lsfp::harness::{quantile, read_results, run_sweep, write_results, Scheme};
use lsfp::SimulationConfig;

fn main() -> lsfp::Result<()> {
    let config = SimulationConfig {
        antennas: 32,
        n_setups: 4,
        ..SimulationConfig::default()
    };
    let result = run_sweep(&config, &[2, 4])?;
    let path = std::env::temp_dir().join("lsfp_sweep.csv");
    write_results(&result, &path)?;
    println!("wrote {} rows to {}", result.rows.len(), path.display());

    let rows = read_results(&path)?;
    for k in [2, 4] {
        for scheme in Scheme::ALL {
            let selected: Vec<_> = rows.iter().filter(|r| r.users_per_cell == k && r.scheme == scheme).collect();
            let se: Vec<f64> = selected.iter().map(|r| r.se).collect();
            println!(
                "K={k} {scheme:>4}: avg sum SE per cell {:7.3}, median user SE {:.3}",
                lsfp::harness::average_sum_se_per_cell(selected.iter().copied()).unwrap_or(f64::NAN),
                quantile(&se, 0.5).unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
