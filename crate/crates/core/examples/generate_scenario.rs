//! Drops users in a four-cell network and prints the long-term parameters of
//! each user's link to its serving BS.

use lsfp::channel::{generate_scenario, large_scale_gain_db};
use lsfp::stats::ClosedFormStatistics;
use lsfp::SimulationConfig;

fn main() -> lsfp::Result<()> {
    let config = SimulationConfig {
        users_per_cell: 3,
        antennas: 64,
        ..SimulationConfig::default()
    };
    let scenario = generate_scenario(&config, 0)?;
    for (l, bs) in scenario.bs_positions.iter().enumerate() {
        println!("cell {l}: BS at ({:.0}, {:.0})", bs.x, bs.y);
        for k in 0..scenario.users_per_cell() {
            let p = scenario.user_position(l, k);
            let d = (p - bs).norm();
            let link = scenario.link(l, k, l);
            println!(
                "  user {k}: ({:6.1}, {:6.1})  d = {d:5.1} m  beta = {:7.2} dB  kappa = {:5.2} dB  ||gbar||^2 / (M beta) = {:.3}",
                p.x,
                p.y,
                large_scale_gain_db(d)?,
                10.0 * link.kappa.log10(),
                link.gbar.norm_squared() / (64.0 * link.beta)
            );
        }
    }
    let stats = ClosedFormStatistics::from_scenario(&scenario)?;
    println!("tr(Psi_00) = {:.4e} W, b_00 = {:.4e}", stats.psi_trace(0, 0), stats.b(0, 0)[0].re);
    Ok(())
}
