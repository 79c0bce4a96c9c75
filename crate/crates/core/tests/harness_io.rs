use std::process::Command;

use lsfp::harness::{
    average_sum_se_per_cell, quantile, read_results, read_rows, run_sweep, run_verification, sidecar_path,
    with_threads, write_results, write_rows, ExperimentResult, Scheme, UserRow, RESULTS_HEADER,
};
use lsfp::se::spectral_efficiency;
use lsfp::SimulationConfig;

fn tiny() -> SimulationConfig {
    SimulationConfig {
        cells: 2,
        antennas: 4,
        n_setups: 3,
        verify_setups: 2,
        mc_realizations: 200,
        ..SimulationConfig::default()
    }
}

#[test]
fn row_count_arithmetic() {
    let cfg = tiny();
    let res = run_sweep(&cfg, &[2, 3]).unwrap();
    assert_eq!(res.rows.len(), 3 * 2 * (2 + 3) * 3);
    for k in [2, 3] {
        for s in Scheme::ALL {
            assert_eq!(res.rows_for(s, k).count(), 2 * k * 3);
        }
    }
}

#[test]
fn rows_are_consistent_with_the_se_formula() {
    let cfg = tiny();
    let res = run_sweep(&cfg, &[2]).unwrap();
    for r in &res.rows {
        assert_eq!(r.se, spectral_efficiency(r.sinr, 2, cfg.tau_c));
    }
    // product column equals the product of the setup's SINRs
    for s in Scheme::ALL {
        for (setup, log_prod) in res.log_product_sinr_by_setup(s, 2) {
            let row = res.rows_for(s, 2).find(|r| r.setup == setup).unwrap();
            assert!((row.product_sinr_setup.ln() - log_prod).abs() < 1e-12 * log_prod.abs().max(1.0));
        }
    }
}

#[test]
fn product_sinr_dominance_per_setup() {
    let res = run_sweep(&tiny(), &[2]).unwrap();
    let lsfp = res.log_product_sinr_by_setup(Scheme::Lsfp, 2);
    let cpc = res.log_product_sinr_by_setup(Scheme::Cpc, 2);
    let lpc = res.log_product_sinr_by_setup(Scheme::Lpc, 2);
    for i in 0..lsfp.len() {
        assert!(lsfp[i].1 >= cpc[i].1 && cpc[i].1 >= lpc[i].1);
    }
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    let res = run_sweep(&tiny(), &[2]).unwrap();
    write_results(&res, &path).unwrap();
    let back = read_results(&path).unwrap();
    assert_eq!(back, res.rows);
    for (a, b) in back.iter().zip(&res.rows) {
        assert_eq!(a.sinr.to_bits(), b.sinr.to_bits());
        assert_eq!(a.se.to_bits(), b.se.to_bits());
        assert_eq!(a.max_slack.to_bits(), b.max_slack.to_bits());
    }
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(sidecar["config"]["L"], 2);
    assert_eq!(sidecar["rows"], res.rows.len());
}

#[test]
fn extreme_values_survive_serialization() {
    let row = UserRow {
        setup: 0,
        scheme: Scheme::Cpc,
        users_per_cell: 1,
        l: 0,
        k: 0,
        sinr: 1.0 / 3.0,
        se: 5e-324,
        product_sinr_setup: 1.7976931348623157e308,
        iters: 7,
        max_slack: 0.0,
    };
    let mut buf = Vec::new();
    write_rows(std::slice::from_ref(&row), &mut buf).unwrap();
    assert_eq!(read_rows(buf.as_slice()).unwrap(), vec![row]);
}

#[test]
fn empty_result_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    write_results(&ExperimentResult::empty(tiny()), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{}\n", RESULTS_HEADER.join(",")));
    assert!(read_results(&path).unwrap().is_empty());
}

#[test]
fn malformed_csv_is_rejected() {
    assert!(read_rows("a,b\n1,2\n".as_bytes()).is_err());
    let text = format!("{}\n0,XYZ,2,0,0,1,1,1,0,0\n", RESULTS_HEADER.join(","));
    assert!(read_rows(text.as_bytes()).is_err());
    let text = format!("{}\n0,LSFP,2,0,0,one,1,1,0,0\n", RESULTS_HEADER.join(","));
    assert!(read_rows(text.as_bytes()).is_err());
}

#[test]
fn aggregates_are_reproducible_from_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let res = run_sweep(&tiny(), &[3]).unwrap();
    write_results(&res, &path).unwrap();
    let rows = read_results(&path).unwrap();
    for s in Scheme::ALL {
        let from_file: Vec<&UserRow> = rows.iter().filter(|r| r.scheme == s).collect();
        let mean = average_sum_se_per_cell(from_file.iter().copied()).unwrap();
        // sum of SE over 3 setups x 2 cells
        let total: f64 = from_file.iter().map(|r| r.se).sum();
        assert_eq!(mean, total / 6.0);
        assert_eq!(Some(mean), res.average_sum_se_per_cell(s, 3));
        let se: Vec<f64> = from_file.iter().map(|r| r.se).collect();
        assert_eq!(quantile(&se, 0.5), quantile(&res.se_values(s, 3), 0.5));
    }
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let cfg = tiny();
    let mut outputs = Vec::new();
    for threads in [1, 3] {
        let res = with_threads(Some(threads), || run_sweep(&cfg, &[2])).unwrap().unwrap();
        let mut buf = Vec::new();
        write_rows(&res.rows, &mut buf).unwrap();
        outputs.push(buf);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn verification_reports_small_gaps_at_moderate_block_counts() {
    let cfg = SimulationConfig {
        mc_realizations: 4000,
        ..tiny()
    };
    let rep = run_verification(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 2 * 3 * 2 * 6);
    assert!(rep.mean_rel_gap() < 0.05, "mean gap {}", rep.mean_rel_gap());
    assert!(rep.max_rel_gap() >= rep.mean_rel_gap());
}

#[test]
fn cli_help_lists_every_flag() {
    for sub in ["sweep", "verify", "single"] {
        let out = Command::new(env!("CARGO_BIN_EXE_lsfp")).args([sub, "--help"]).output().unwrap();
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        for flag in ["--config", "--out", "--k-values", "--seed", "--threads"] {
            assert!(text.contains(flag), "{sub} --help lacks {flag}");
        }
    }
}

#[test]
fn cli_reports_errors_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"L": 2, "unknown_field": 1}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lsfp"))
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("error"));
}

#[test]
fn cli_single_and_verify_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, tiny().to_json_pretty().unwrap()).unwrap();
    let single = dir.path().join("single.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_lsfp"))
        .args(["single", "--k-values", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&single)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("iteration=0 objective="));
    assert_eq!(read_results(&single).unwrap().len(), 3 * 2 * 2);

    let verify = dir.path().join("verify.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_lsfp"))
        .args(["verify", "--seed", "9", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&verify)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&verify).unwrap();
    assert!(text.starts_with("setup,scheme,K,l,k,sinr_closed_form,sinr_monte_carlo,se_closed_form,se_monte_carlo,rel_gap\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 3 * 2 * 6);
}
