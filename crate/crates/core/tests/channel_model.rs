use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lsfp::channel::{generate_scenario, grid_bs_positions, ChannelComponents, ANGULAR_SPREAD_RAD};
use lsfp::linalg::min_eigenvalue;
use lsfp::montecarlo::RealizationSampler;
use lsfp::{Error, SimulationConfig};

/// Marginal CDF of the x coordinate for a point uniform on the square
/// `[x0, x0 + side]^2` minus the disk of radius `rho` at the square's center.
fn square_minus_disk_cdf(x: f64, x0: f64, side: f64, rho: f64) -> f64 {
    let center = x0 + side / 2.0;
    let u = (x - center).clamp(-rho, rho);
    // disk area left of the vertical line through x
    let disk_left = rho * rho * (-u / rho).acos() + u * (rho * rho - u * u).sqrt();
    ((x - x0) * side - disk_left) / (side * side - std::f64::consts::PI * rho * rho)
}

#[test]
fn user_drops_follow_the_conditional_uniform_law() {
    let cfg = SimulationConfig {
        cells: 1,
        users_per_cell: 10,
        antennas: 1,
        ..SimulationConfig::default()
    };
    let mut xs = Vec::new();
    for setup in 0..400 {
        let s = generate_scenario(&cfg, setup).unwrap();
        for k in 0..10 {
            let p = s.user_position(0, k);
            assert!((p - s.bs_positions[0]).norm() >= cfg.min_bs_distance);
            assert!(p.x >= 0.0 && p.x <= 150.0 && p.y >= 0.0 && p.y <= 150.0);
            xs.push(p.x);
        }
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = square_minus_disk_cdf(x, 0.0, 150.0, cfg.min_bs_distance);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    // Kolmogorov-Smirnov critical value at alpha = 0.001
    let critical = 1.949 / n.sqrt();
    assert!(d < critical, "KS statistic {d} exceeds {critical}");
}

#[test]
fn cdf_oracle_is_a_distribution() {
    assert!(square_minus_disk_cdf(0.0, 0.0, 150.0, 20.0).abs() < 1e-15);
    assert!((square_minus_disk_cdf(150.0, 0.0, 150.0, 20.0) - 1.0).abs() < 1e-15);
    assert!((square_minus_disk_cdf(75.0, 0.0, 150.0, 20.0) - 0.5).abs() < 1e-15);
}

#[test]
fn users_stay_in_their_own_cell() {
    let cfg = SimulationConfig {
        antennas: 4,
        users_per_cell: 5,
        ..SimulationConfig::default()
    };
    let s = generate_scenario(&cfg, 3).unwrap();
    let bs = grid_bs_positions(4, 150.0);
    for (l, center) in bs.iter().enumerate() {
        for k in 0..5 {
            let p = s.user_position(l, k);
            assert!((p.x - center.x).abs() <= 75.0 && (p.y - center.y).abs() <= 75.0);
        }
    }
}

#[test]
fn scenario_is_a_function_of_config_and_setup() {
    let cfg = SimulationConfig {
        antennas: 8,
        users_per_cell: 3,
        ..SimulationConfig::default()
    };
    assert_eq!(generate_scenario(&cfg, 5).unwrap(), generate_scenario(&cfg, 5).unwrap());
    assert_ne!(generate_scenario(&cfg, 5).unwrap(), generate_scenario(&cfg, 6).unwrap());
    let other_seed = SimulationConfig { seed: 2, ..cfg.clone() };
    assert_ne!(generate_scenario(&cfg, 5).unwrap(), generate_scenario(&other_seed, 5).unwrap());
}

#[test]
fn impossible_geometry_reports_drop_failure() {
    let cfg = SimulationConfig {
        cells: 1,
        users_per_cell: 1,
        antennas: 2,
        min_bs_distance: 200.0,
        ..SimulationConfig::default()
    };
    match generate_scenario(&cfg, 0) {
        Err(Error::DropRetryExceeded { cell: 0, attempts }) => assert_eq!(attempts, 10_000),
        other => panic!("expected drop failure, got {other:?}"),
    }
}

#[test]
fn every_generated_covariance_is_psd() {
    let cfg = SimulationConfig {
        antennas: 24,
        users_per_cell: 2,
        ..SimulationConfig::default()
    };
    let s = generate_scenario(&cfg, 0).unwrap();
    for link in s.links() {
        let r = &link.covariance;
        let tr: f64 = r.diagonal().iter().map(|z| z.re).sum();
        assert!(min_eigenvalue(r) >= -1e-9 * tr / 24.0);
        let total = link.gbar.norm_squared() + tr;
        assert!((total / (24.0 * link.beta) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sample_mean_and_covariance_of_the_channel() {
    let m = 3;
    let comp = ChannelComponents::from_gain(m, 2.0, 0.8, 0.4, ANGULAR_SPREAD_RAD).unwrap();
    let cfg = SimulationConfig {
        cells: 1,
        users_per_cell: 1,
        antennas: m,
        ..SimulationConfig::default()
    };
    // Replace the generated link with the one under test.
    let base = generate_scenario(&cfg, 0).unwrap();
    let scenario = lsfp::NetworkScenario::from_links(
        1,
        1,
        m,
        1,
        cfg.eta,
        cfg.sigma2,
        base.bs_positions.clone(),
        base.user_positions.clone(),
        vec![comp.clone()],
    )
    .unwrap();
    let sampler = RealizationSampler::new(&scenario).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut out = sampler.empty_realization();
    let n = 200_000;
    let mut mean = vec![Complex64::new(0.0, 0.0); m];
    let mut second = vec![0.0; m];
    for _ in 0..n {
        sampler.sample_into(&mut rng, &mut out);
        for (i, g) in out.g(0, 0, 0).iter().enumerate() {
            mean[i] += g;
            second[i] += g.norm_sqr();
        }
    }
    for i in 0..m {
        // random LOS phase: zero mean; E|g_i|^2 = |gbar_i|^2 + R_ii
        let var = comp.gbar[i].norm_sqr() + comp.covariance[(i, i)].re;
        let sd = (var / n as f64).sqrt();
        assert!((mean[i] / n as f64).norm() < 4.0 * sd);
        assert!((second[i] / n as f64 / var - 1.0).abs() < 0.02);
    }
}
