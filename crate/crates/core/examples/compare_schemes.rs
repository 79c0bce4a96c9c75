//! Runs LPC, CPC and LSFP on one full-size setup (L = 4, M = 200) and
//! prints per-cell sum SE and per-user SE for each scheme.

use lsfp::harness::{run_setup, Scheme};
use lsfp::SimulationConfig;

fn main() -> lsfp::Result<()> {
    let users: usize = std::env::args().nth(1).map_or(Ok(6), |s| s.parse()).expect("K must be an integer");
    let config = SimulationConfig::default().with_users_per_cell(users);
    let outcome = run_setup(&config, 0)?;
    for scheme in Scheme::ALL {
        let s = outcome.scheme(scheme);
        let per_cell: Vec<String> = s.result.sum_se_per_cell().iter().map(|v| format!("{v:6.2}")).collect();
        println!(
            "{scheme:>4}: {:2} SCA iterations, sum SE per cell [{}] bit/s/Hz",
            s.iterations,
            per_cell.join(", ")
        );
    }
    let lsfp = &outcome.scheme(Scheme::Lsfp).result;
    let cpc = &outcome.scheme(Scheme::Cpc).result;
    for l in 0..config.cells {
        for k in 0..users {
            println!("user ({l}, {k}): LSFP {:.3}  CPC {:.3}", lsfp.se_at(l, k), cpc.se_at(l, k));
        }
    }
    Ok(())
}
