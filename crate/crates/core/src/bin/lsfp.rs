use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lsfp::harness::{
    run_setup, run_sweep, run_verification, with_threads, write_results, write_verification, Scheme,
};
use lsfp::optimizer::write_trace;
use lsfp::{Result, SimulationConfig};

/// Large-scale fading precoding simulator for multi-cell massive MIMO.
#[derive(Parser)]
#[command(name = "lsfp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; defaults are used for omitted fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; a JSON sidecar with the configuration is written
    /// next to it.
    #[arg(long)]
    out: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every setup for each K value with LSFP, CPC and LPC.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated users-per-cell values, e.g. 2,4,6.
        #[arg(long, value_delimiter = ',')]
        k_values: Option<Vec<usize>>,
    },
    /// Compare closed-form and Monte Carlo SINRs on the first verify_setups setups.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Users per cell (overrides the configuration's K).
        #[arg(long, value_delimiter = ',')]
        k_values: Option<Vec<usize>>,
    },
    /// Run one setup and print the optimizer trace.
    Single {
        #[command(flatten)]
        common: Common,
        /// Users per cell (overrides the configuration's K).
        #[arg(long, value_delimiter = ',')]
        k_values: Option<Vec<usize>>,
        /// Setup index.
        #[arg(long, default_value_t = 0)]
        setup: usize,
    },
}

fn load_config(common: &Common) -> Result<SimulationConfig> {
    let mut cfg = match &common.config {
        Some(p) => SimulationConfig::from_json_file(p)?,
        None => SimulationConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn single_k(cfg: SimulationConfig, k_values: &Option<Vec<usize>>) -> Result<SimulationConfig> {
    match k_values.as_deref() {
        None => Ok(cfg),
        Some([k]) => Ok(cfg.with_users_per_cell(*k)),
        Some(_) => Err(lsfp::Error::InvalidArgument("this subcommand takes a single K value".into())),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep { common, k_values } => {
            let cfg = load_config(&common)?;
            let ks = k_values.unwrap_or_else(|| cfg.k_values.clone());
            let result = with_threads(common.threads, || run_sweep(&cfg, &ks))??;
            write_results(&result, &common.out)?;
            for &k in &ks {
                let parts: Vec<String> = Scheme::ALL
                    .iter()
                    .map(|&s| format!("{}={:.4}", s, result.average_sum_se_per_cell(s, k).unwrap_or(f64::NAN)))
                    .collect();
                eprintln!("K={k} avg sum SE per cell: {}", parts.join(" "));
            }
        }
        Command::Verify { common, k_values } => {
            let cfg = single_k(load_config(&common)?, &k_values)?;
            let report = with_threads(common.threads, || run_verification(&cfg))??;
            write_verification(&report, std::fs::File::create(&common.out)?)?;
            write_sidecar(&cfg, &common.out)?;
            eprintln!(
                "{} users checked with {} blocks: max rel gap {:.4e}, mean rel gap {:.4e}",
                report.rows.len(),
                report.blocks,
                report.max_rel_gap(),
                report.mean_rel_gap()
            );
        }
        Command::Single { common, k_values, setup } => {
            let cfg = single_k(load_config(&common)?, &k_values)?;
            let outcome = with_threads(common.threads, || run_setup(&cfg, setup))??;
            let mut result = lsfp::ExperimentResult::empty(cfg.clone());
            result.k_values = vec![cfg.users_per_cell];
            result.push_setup(&outcome);
            write_results(&result, &common.out)?;
            let stderr = std::io::stderr();
            for s in &outcome.schemes {
                if !s.trace.is_empty() {
                    eprintln!("{} trace:", s.scheme);
                    write_trace(&s.trace, stderr.lock())?;
                }
                eprintln!(
                    "{}: log product SINR {:.6}, sum SE {:.6}",
                    s.scheme,
                    s.result.sinr.iter().map(|x| x.ln()).sum::<f64>(),
                    s.result.se.iter().sum::<f64>()
                );
            }
        }
    }
    Ok(())
}

fn write_sidecar(cfg: &SimulationConfig, out: &Path) -> Result<()> {
    let mut text = cfg.to_json_pretty()?;
    text.push('\n');
    std::fs::write(lsfp::harness::sidecar_path(out), text)?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
