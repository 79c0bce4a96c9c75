//! Multi-setup experiments: per-setup pipelines, sweeps over `K`, Monte Carlo
//! verification, and CSV persistence.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{cpc_optimize, lpc_weights};
use crate::channel::{generate_scenario, setup_seed, NetworkScenario};
use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::montecarlo::{estimate, MonteCarloOptions};
use crate::optimizer::{IterationRecord, LsfpOptimizer, WeightPattern};
use crate::se::{PrecodingWeights, SeResult};
use crate::stats::ClosedFormStatistics;

pub const RESULTS_HEADER: [&str; 10] = [
    "setup",
    "scheme",
    "K",
    "l",
    "k",
    "sinr",
    "se",
    "product_sinr_setup",
    "iters",
    "max_slack",
];

pub const VERIFICATION_HEADER: [&str; 10] = [
    "setup",
    "scheme",
    "K",
    "l",
    "k",
    "sinr_closed_form",
    "sinr_monte_carlo",
    "se_closed_form",
    "se_monte_carlo",
    "rel_gap",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Scheme {
    Lsfp,
    Cpc,
    Lpc,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Lsfp, Scheme::Cpc, Scheme::Lpc];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Lsfp => "LSFP",
            Scheme::Cpc => "CPC",
            Scheme::Lpc => "LPC",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Schema(format!("unknown scheme {s:?}")))
    }
}

/// One scheme's outcome on one setup.
#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    pub weights: PrecodingWeights,
    pub result: SeResult,
    /// SCA subproblems solved (0 for LPC).
    pub iterations: usize,
    /// Largest feasibility slack of the returned iterate, in units of the
    /// noise power.
    pub max_slack: f64,
    pub trace: Vec<IterationRecord>,
}

/// Everything computed for one `(K, setup)` pair.
#[derive(Debug, Clone)]
pub struct SetupOutcome {
    pub setup: usize,
    pub scenario: NetworkScenario,
    pub stats: ClosedFormStatistics,
    /// In `Scheme::ALL` order.
    pub schemes: Vec<SchemeOutcome>,
}

impl SetupOutcome {
    pub fn scheme(&self, scheme: Scheme) -> &SchemeOutcome {
        self.schemes.iter().find(|s| s.scheme == scheme).expect("all schemes are present")
    }
}

/// Runs LPC, then CPC initialized at LPC, then LSFP warm-started from CPC on
/// setup `setup` of `config`.
pub fn run_setup(config: &SimulationConfig, setup: usize) -> Result<SetupOutcome> {
    let scenario = generate_scenario(config, setup)?;
    let stats = ClosedFormStatistics::from_scenario(&scenario)?;
    let users = config.users_per_cell;
    let evaluate = |scheme: Scheme, weights: &PrecodingWeights| {
        SeResult::evaluate(scheme.name(), setup, &stats, weights, config.tau_c)
    };

    let mut schemes = Vec::with_capacity(3);
    if users == 0 {
        for scheme in Scheme::ALL {
            let weights = PrecodingWeights::zeros(config.cells, 0);
            schemes.push(SchemeOutcome {
                scheme,
                result: evaluate(scheme, &weights)?,
                weights,
                iterations: 0,
                max_slack: 0.0,
                trace: Vec::new(),
            });
        }
        return Ok(SetupOutcome {
            setup,
            scenario,
            stats,
            schemes,
        });
    }

    let lpc = lpc_weights(&stats, config.rho_d)?;
    let cpc = cpc_optimize(&stats, config.rho_d, config.optimizer)?;
    let opt = LsfpOptimizer::new(&stats, config.rho_d, WeightPattern::Full, config.optimizer)?;
    let lsfp = opt.run(opt.state_from_weights(&cpc.weights)?)?;

    schemes.push(SchemeOutcome {
        scheme: Scheme::Lsfp,
        result: evaluate(Scheme::Lsfp, &lsfp.weights)?,
        max_slack: lsfp.state.max_slack(),
        weights: lsfp.weights,
        iterations: lsfp.iterations,
        trace: lsfp.trace,
    });
    schemes.push(SchemeOutcome {
        scheme: Scheme::Cpc,
        result: evaluate(Scheme::Cpc, &cpc.weights)?,
        max_slack: cpc.state.max_slack(),
        weights: cpc.weights,
        iterations: cpc.iterations,
        trace: cpc.trace,
    });
    schemes.push(SchemeOutcome {
        scheme: Scheme::Lpc,
        result: evaluate(Scheme::Lpc, &lpc)?,
        weights: lpc,
        iterations: 0,
        max_slack: 0.0,
        trace: Vec::new(),
    });
    Ok(SetupOutcome {
        setup,
        scenario,
        stats,
        schemes,
    })
}

/// One CSV row: a user under one scheme in one setup.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRow {
    pub setup: usize,
    pub scheme: Scheme,
    pub users_per_cell: usize,
    pub l: usize,
    pub k: usize,
    pub sinr: f64,
    pub se: f64,
    pub product_sinr_setup: f64,
    pub iters: usize,
    pub max_slack: f64,
}

impl UserRow {
    fn sort_key(&self) -> (usize, usize, Scheme, usize, usize) {
        (self.users_per_cell, self.setup, self.scheme, self.l, self.k)
    }
}

/// Rows of a sweep plus the configuration that produced them.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: SimulationConfig,
    pub k_values: Vec<usize>,
    pub rows: Vec<UserRow>,
}

impl ExperimentResult {
    pub fn empty(config: SimulationConfig) -> Self {
        Self {
            config,
            k_values: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push_setup(&mut self, outcome: &SetupOutcome) {
        for s in &outcome.schemes {
            self.rows.extend(setup_rows(outcome.setup, s));
        }
        self.sort();
    }

    /// Canonical order: `K`, setup, scheme (LSFP, CPC, LPC), `l`, `k`.
    pub fn sort(&mut self) {
        self.rows.sort_by_key(UserRow::sort_key);
    }

    pub fn rows_for(&self, scheme: Scheme, users_per_cell: usize) -> impl Iterator<Item = &UserRow> {
        self.rows
            .iter()
            .filter(move |r| r.scheme == scheme && r.users_per_cell == users_per_cell)
    }

    /// Per-user SE values of one scheme at one `K`.
    pub fn se_values(&self, scheme: Scheme, users_per_cell: usize) -> Vec<f64> {
        self.rows_for(scheme, users_per_cell).map(|r| r.se).collect()
    }

    /// Mean over setups and cells of the per-cell sum SE.
    pub fn average_sum_se_per_cell(&self, scheme: Scheme, users_per_cell: usize) -> Option<f64> {
        average_sum_se_per_cell(self.rows_for(scheme, users_per_cell))
    }

    /// `log prod SINR` of every setup of one scheme at one `K`, by setup index.
    pub fn log_product_sinr_by_setup(&self, scheme: Scheme, users_per_cell: usize) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for r in self.rows_for(scheme, users_per_cell) {
            match out.last_mut() {
                Some((s, v)) if *s == r.setup => *v += r.sinr.ln(),
                _ => out.push((r.setup, r.sinr.ln())),
            }
        }
        out
    }
}

fn setup_rows(setup: usize, s: &SchemeOutcome) -> Vec<UserRow> {
    let r = &s.result;
    let product = r.product_sinr();
    let mut rows = Vec::with_capacity(r.sinr.len());
    for l in 0..r.cells {
        for k in 0..r.users_per_cell {
            rows.push(UserRow {
                setup,
                scheme: s.scheme,
                users_per_cell: r.users_per_cell,
                l,
                k,
                sinr: r.sinr_at(l, k),
                se: r.se_at(l, k),
                product_sinr_setup: product,
                iters: s.iterations,
                max_slack: s.max_slack,
            });
        }
    }
    rows
}

/// `sum se / (setups * cells)`, counting distinct setups and cells in `rows`.
pub fn average_sum_se_per_cell<'a>(rows: impl IntoIterator<Item = &'a UserRow>) -> Option<f64> {
    let mut cells = std::collections::BTreeSet::new();
    let mut total = 0.0;
    for r in rows {
        cells.insert((r.setup, r.l));
        total += r.se;
    }
    if cells.is_empty() {
        None
    } else {
        Some(total / cells.len() as f64)
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Runs every setup of `config` for each `K` in `k_values`. Setups run in
/// parallel on the current rayon pool; the result does not depend on the
/// number of threads.
pub fn run_sweep(config: &SimulationConfig, k_values: &[usize]) -> Result<ExperimentResult> {
    if k_values.is_empty() {
        return Err(Error::InvalidArgument("at least one K value is required".into()));
    }
    let mut result = ExperimentResult::empty(config.clone());
    result.k_values = k_values.to_vec();
    for &k in k_values {
        let cfg = config.with_users_per_cell(k);
        cfg.validate()?;
        let outcomes: Vec<Vec<UserRow>> = (0..cfg.n_setups)
            .into_par_iter()
            .map(|setup| {
                let o = run_setup(&cfg, setup).map_err(|e| Error::Setup {
                    k,
                    setup,
                    source: Box::new(e),
                })?;
                Ok(o.schemes.iter().flat_map(|s| setup_rows(setup, s)).collect())
            })
            .collect::<Result<_>>()?;
        result.rows.extend(outcomes.into_iter().flatten());
    }
    result.sort();
    Ok(result)
}

/// Runs `f` on a dedicated pool with `threads` workers, or on the global
/// pool when `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidArgument("thread count must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON sidecar path for a results file: same stem, `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a SimulationConfig,
    k_values: &'a [usize],
    rows: usize,
    schemes: [&'static str; 3],
}

/// Serializes rows to CSV (bytes only, no sidecar).
pub fn write_rows<W: Write>(rows: &[UserRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.setup.to_string(),
            r.scheme.name().to_string(),
            r.users_per_cell.to_string(),
            r.l.to_string(),
            r.k.to_string(),
            fmt_f64(r.sinr),
            fmt_f64(r.se),
            fmt_f64(r.product_sinr_setup),
            r.iters.to_string(),
            fmt_f64(r.max_slack),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the CSV to `path` and the configuration to its JSON sidecar.
pub fn write_results(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut rows = result.rows.clone();
    rows.sort_by_key(UserRow::sort_key);
    write_rows(&rows, File::create(path)?)?;
    let sidecar = Sidecar {
        config: &result.config,
        k_values: &result.k_values,
        rows: rows.len(),
        schemes: Scheme::ALL.map(Scheme::name),
    };
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    std::fs::write(sidecar_path(path), text)?;
    Ok(())
}

fn field<T: FromStr>(record: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    let raw = record.get(i).ok_or_else(|| Error::Schema(format!("line {line}: missing column {}", RESULTS_HEADER[i])))?;
    raw.parse()
        .map_err(|_| Error::Schema(format!("line {line}: cannot parse {} = {raw:?}", RESULTS_HEADER[i])))
}

/// Parses a results CSV produced by `write_rows`.
pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<UserRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::Schema(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(UserRow {
            setup: field(&rec, 0, line)?,
            scheme: rec.get(1).unwrap_or_default().parse()?,
            users_per_cell: field(&rec, 2, line)?,
            l: field(&rec, 3, line)?,
            k: field(&rec, 4, line)?,
            sinr: field(&rec, 5, line)?,
            se: field(&rec, 6, line)?,
            product_sinr_setup: field(&rec, 7, line)?,
            iters: field(&rec, 8, line)?,
            max_slack: field(&rec, 9, line)?,
        });
    }
    Ok(rows)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<UserRow>> {
    read_rows(File::open(path)?)
}

/// Closed-form vs Monte Carlo SINR of one user under one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRow {
    pub setup: usize,
    pub scheme: Scheme,
    pub users_per_cell: usize,
    pub l: usize,
    pub k: usize,
    pub sinr_closed_form: f64,
    pub sinr_monte_carlo: f64,
    pub se_closed_form: f64,
    pub se_monte_carlo: f64,
    /// `|sinr_mc - sinr_cf| / sinr_cf`.
    pub rel_gap: f64,
}

#[derive(Debug, Clone, Default)]
pub struct VerificationReport {
    pub blocks: usize,
    pub rows: Vec<VerificationRow>,
}

impl VerificationReport {
    pub fn max_rel_gap(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_gap).fold(0.0, f64::max)
    }

    pub fn mean_rel_gap(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.rows.iter().map(|r| r.rel_gap).sum::<f64>() / self.rows.len() as f64
        }
    }
}

fn relative_gap(closed_form: f64, monte_carlo: f64) -> f64 {
    if closed_form == monte_carlo {
        0.0
    } else {
        (monte_carlo - closed_form).abs() / closed_form.abs()
    }
}

/// Monte Carlo check of the closed-form SINR of every user for one set of
/// weights.
pub fn verify_weights(
    scenario: &NetworkScenario,
    stats: &ClosedFormStatistics,
    weights: &PrecodingWeights,
    blocks: usize,
    seed: u64,
    tau_c: usize,
) -> Result<Vec<(f64, f64)>> {
    let est = estimate(
        scenario,
        Some(weights),
        MonteCarloOptions {
            blocks,
            seed,
            estimate_psi: false,
        },
    )?;
    let closed = SeResult::evaluate("", 0, stats, weights, tau_c)?;
    let mut out = Vec::with_capacity(closed.sinr.len());
    for l in 0..stats.cells() {
        for k in 0..stats.users_per_cell() {
            let mc = est.sinr_estimate(l, k).expect("weights were supplied").sinr();
            out.push((closed.sinr_at(l, k), mc));
        }
    }
    Ok(out)
}

fn verification_seed(config: &SimulationConfig, setup: usize, scheme: Scheme) -> u64 {
    setup_seed(config.seed ^ 0x7665_7269_6679_0000 ^ scheme as u64, config.users_per_cell, setup)
}

/// Compares closed-form and Monte Carlo SINRs of every user and scheme on the
/// first `verify_setups` setups, with `mc_realizations` blocks each.
pub fn run_verification(config: &SimulationConfig) -> Result<VerificationReport> {
    config.validate()?;
    if config.mc_realizations == 0 {
        return Err(Error::InvalidConfig("mc_realizations must be positive".into()));
    }
    let n = config.verify_setups.min(config.n_setups);
    let k_users = config.users_per_cell;
    let per_setup: Vec<Vec<VerificationRow>> = (0..n)
        .into_par_iter()
        .map(|setup| {
            let ctx = |e| Error::Setup {
                k: k_users,
                setup,
                source: Box::new(e),
            };
            let o = run_setup(config, setup).map_err(ctx)?;
            let mut rows = Vec::new();
            for s in &o.schemes {
                let pairs = verify_weights(
                    &o.scenario,
                    &o.stats,
                    &s.weights,
                    config.mc_realizations,
                    verification_seed(config, setup, s.scheme),
                    config.tau_c,
                )
                .map_err(ctx)?;
                for (i, (cf, mc)) in pairs.into_iter().enumerate() {
                    let se = |x| crate::se::spectral_efficiency(x, o.stats.tau_p, config.tau_c);
                    rows.push(VerificationRow {
                        setup,
                        scheme: s.scheme,
                        users_per_cell: k_users,
                        l: i / k_users,
                        k: i % k_users,
                        sinr_closed_form: cf,
                        sinr_monte_carlo: mc,
                        se_closed_form: se(cf),
                        se_monte_carlo: se(mc),
                        rel_gap: relative_gap(cf, mc),
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(VerificationReport {
        blocks: config.mc_realizations,
        rows: per_setup.into_iter().flatten().collect(),
    })
}

pub fn write_verification<W: Write>(report: &VerificationReport, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(VERIFICATION_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.setup.to_string(),
            r.scheme.name().to_string(),
            r.users_per_cell.to_string(),
            r.l.to_string(),
            r.k.to_string(),
            fmt_f64(r.sinr_closed_form),
            fmt_f64(r.sinr_monte_carlo),
            fmt_f64(r.se_closed_form),
            fmt_f64(r.se_monte_carlo),
            fmt_f64(r.rel_gap),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SimulationConfig {
        SimulationConfig {
            cells: 2,
            antennas: 8,
            n_setups: 2,
            verify_setups: 1,
            mc_realizations: 64,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn row_count_and_order() {
        let cfg = small_config();
        let res = run_sweep(&cfg, &[2]).unwrap();
        assert_eq!(res.rows.len(), 3 * 2 * 2 * 2);
        let keys: Vec<_> = res.rows.iter().map(UserRow::sort_key).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(res.rows[0].scheme, Scheme::Lsfp);
        assert_eq!(res.rows[0].iters, res.rows[1].iters);
    }

    #[test]
    fn empty_k_list_is_rejected() {
        assert!(run_sweep(&small_config(), &[]).is_err());
    }

    #[test]
    fn zero_users_gives_no_rows() {
        let res = run_sweep(&small_config(), &[0]).unwrap();
        assert!(res.rows.is_empty());
    }

    #[test]
    fn header_only_for_empty_rows() {
        let mut buf = Vec::new();
        write_rows(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), RESULTS_HEADER.join(",") + "\n");
    }

    #[test]
    fn quantile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(4.0));
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("lsfp".parse::<Scheme>().is_err());
    }

    #[test]
    fn verification_covers_every_user_and_scheme() {
        let rep = run_verification(&small_config()).unwrap();
        assert_eq!(rep.rows.len(), 3 * 2 * 6);
        assert!(rep.rows.iter().all(|r| r.rel_gap.is_finite()));
    }
}
