//! Monte Carlo channel sampling and brute-force estimates of the closed-form
//! statistics and SINRs.
//!
//! Blocks are processed in fixed-size chunks, each with its own RNG stream
//! derived from `(seed, chunk index)`. Chunk sums are reduced in chunk order,
//! so estimates are bit-identical for any thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::{splitmix64, NetworkScenario};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_sqrt, CMatrix, CVector};
use crate::se::PrecodingWeights;

/// Coherence blocks per RNG stream.
pub const CHUNK_BLOCKS: usize = 2048;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One coherence block: every channel `g_lk^r` and every despread pilot `z_lk`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    cells: usize,
    users_per_cell: usize,
    antennas: usize,
    g: Vec<Complex64>,
    z: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn new(cells: usize, users_per_cell: usize, antennas: usize) -> Self {
        Self {
            cells,
            users_per_cell,
            antennas,
            g: vec![ZERO; cells * users_per_cell * cells * antennas],
            z: vec![ZERO; cells * users_per_cell * antennas],
        }
    }

    /// Channel from user `(l, k)` to BS `r`.
    pub fn g(&self, l: usize, k: usize, r: usize) -> &[Complex64] {
        let start = ((l * self.users_per_cell + k) * self.cells + r) * self.antennas;
        &self.g[start..start + self.antennas]
    }

    /// Despread pilot `k` at BS `l`.
    pub fn z(&self, l: usize, k: usize) -> &[Complex64] {
        let start = (l * self.users_per_cell + k) * self.antennas;
        &self.z[start..start + self.antennas]
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `x^H y`
fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Draws channel realizations for a fixed scenario. Holds the Hermitian
/// square roots of every NLOS covariance.
pub struct RealizationSampler<'a> {
    scenario: &'a NetworkScenario,
    // column-major square roots, one per (l, k, r); None for zero covariance
    sqrt_cov: Vec<Option<Vec<Complex64>>>,
}

impl<'a> RealizationSampler<'a> {
    pub fn new(scenario: &'a NetworkScenario) -> Result<Self> {
        let sqrt_cov = scenario
            .links()
            .iter()
            .map(|link| {
                if link.covariance.iter().all(|z| *z == ZERO) {
                    return Ok(None);
                }
                let s = hermitian_sqrt(&link.covariance);
                if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Factorization("non-finite covariance square root".into()));
                }
                Ok(Some(s.as_slice().to_vec()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { scenario, sqrt_cov })
    }

    pub fn empty_realization(&self) -> ChannelRealization {
        let s = self.scenario;
        ChannelRealization::new(s.cells(), s.users_per_cell(), s.antennas())
    }

    /// Fills `out` with a fresh block: new LOS phases, new NLOS draws, new
    /// pilot noise.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut ChannelRealization) {
        let s = self.scenario;
        let (cells, users, m) = (s.cells(), s.users_per_cell(), s.antennas());
        let mut w = vec![ZERO; m];
        for (idx, link) in s.links().iter().enumerate() {
            let g = &mut out.g[idx * m..(idx + 1) * m];
            let phase = Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
            for (gi, mean) in g.iter_mut().zip(link.gbar.iter()) {
                *gi = phase * mean;
            }
            if let Some(root) = &self.sqrt_cov[idx] {
                for wi in w.iter_mut() {
                    *wi = complex_normal(rng);
                }
                for (j, wj) in w.iter().enumerate() {
                    let col = &root[j * m..(j + 1) * m];
                    for (gi, c) in g.iter_mut().zip(col) {
                        *gi += c * wj;
                    }
                }
            }
        }
        let amp = s.pilot_amplitude();
        let noise_std = s.sigma2.sqrt();
        for l in 0..cells {
            for k in 0..users {
                let start = (l * users + k) * m;
                for i in 0..m {
                    let mut acc = ZERO;
                    for r in 0..cells {
                        acc += out.g[((r * users + k) * cells + l) * m + i];
                    }
                    out.z[start + i] = acc * amp;
                }
                if noise_std > 0.0 {
                    for i in 0..m {
                        out.z[start + i] += complex_normal(rng) * noise_std;
                    }
                }
            }
        }
    }
}

/// Draws one block. Builds a fresh sampler; prefer [`RealizationSampler`]
/// for repeated draws.
pub fn sample_realization<R: Rng + ?Sized>(scenario: &NetworkScenario, rng: &mut R) -> Result<ChannelRealization> {
    let sampler = RealizationSampler::new(scenario)?;
    let mut out = sampler.empty_realization();
    sampler.sample_into(rng, &mut out);
    Ok(out)
}

/// Transmitted vectors `x_l = sum_k conj(z_lk) v_lk` with
/// `v_lk = sum_r conj(a_rk^l) s_rk`. `symbols` is row-major `[l][k]`.
pub fn transmit_signals(
    realization: &ChannelRealization,
    weights: &PrecodingWeights,
    symbols: &[Complex64],
) -> Vec<CVector> {
    let (cells, users, m) = (realization.cells, realization.users_per_cell, realization.antennas);
    (0..cells)
        .map(|l| {
            let mut x = CVector::zeros(m);
            for k in 0..users {
                let v: Complex64 = (0..cells).map(|r| weights.a(r, k)[l].conj() * symbols[r * users + k]).sum();
                for (xi, zi) in x.iter_mut().zip(realization.z(l, k)) {
                    *xi += zi.conj() * v;
                }
            }
            x
        })
        .collect()
}

/// Received samples `y_lk = sum_r (g_lk^r)^T x_r + n_lk`, row-major `[l][k]`.
pub fn received_signals(realization: &ChannelRealization, transmitted: &[CVector], noise: &[Complex64]) -> Vec<Complex64> {
    let (cells, users) = (realization.cells, realization.users_per_cell);
    let mut y = Vec::with_capacity(cells * users);
    for l in 0..cells {
        for k in 0..users {
            let mut acc = noise[l * users + k];
            for (r, x) in transmitted.iter().enumerate() {
                acc += realization.g(l, k, r).iter().zip(x.iter()).map(|(g, x)| g * x).sum::<Complex64>();
            }
            y.push(acc);
        }
    }
    y
}

/// Monte Carlo estimates of the terms of the use-and-then-forget SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrEstimate {
    /// Sample mean of `sum_r conj(a_lk^r) z_rk^H g_lk^r`.
    pub desired: Complex64,
    /// `E|BU|^2`: second moment of the same quantity minus `|desired|^2`.
    pub beamforming_uncertainty: f64,
    /// `sum_{r != l} E|PC_lk^r|^2`.
    pub pilot_contamination: f64,
    /// `sum_r sum_{k' != k} E|NI_lk^{rk'}|^2`.
    pub noncoherent_interference: f64,
    pub noise: f64,
}

impl SinrEstimate {
    pub fn interference_plus_noise(&self) -> f64 {
        self.beamforming_uncertainty + self.pilot_contamination + self.noncoherent_interference + self.noise
    }

    pub fn sinr(&self) -> f64 {
        let num = self.desired.norm_sqr();
        if num == 0.0 {
            0.0
        } else {
            num / self.interference_plus_noise()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MonteCarloOptions {
    pub blocks: usize,
    pub seed: u64,
    /// Also accumulate sample covariances of every `z_lk` (costs `M^2` per user).
    pub estimate_psi: bool,
}

/// Sample averages over `blocks` realizations.
#[derive(Debug, Clone)]
pub struct MonteCarloEstimate {
    pub blocks: usize,
    cells: usize,
    users_per_cell: usize,
    /// Sample `E[z z^H]`, present when requested.
    pub psi: Option<Vec<CMatrix>>,
    b: Vec<CVector>,
    c: Vec<CMatrix>,
    /// Per-user SINR terms, present when weights were supplied.
    pub sinr: Option<Vec<SinrEstimate>>,
}

impl MonteCarloEstimate {
    pub fn b(&self, l: usize, k: usize) -> &CVector {
        &self.b[l * self.users_per_cell + k]
    }

    pub fn c(&self, l: usize, k: usize, k_prime: usize) -> &CMatrix {
        &self.c[(l * self.users_per_cell + k) * self.users_per_cell + k_prime]
    }

    pub fn psi(&self, l: usize, k: usize) -> Option<&CMatrix> {
        self.psi.as_ref().map(|p| &p[l * self.users_per_cell + k])
    }

    pub fn sinr_estimate(&self, l: usize, k: usize) -> Option<&SinrEstimate> {
        self.sinr.as_ref().map(|s| &s[l * self.users_per_cell + k])
    }

    pub fn cells(&self) -> usize {
        self.cells
    }
}

#[derive(Clone)]
struct Accumulator {
    psi: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
    desired: Vec<Complex64>,
    desired_sq: Vec<f64>,
    pc: Vec<f64>,
    ni: Vec<f64>,
}

impl Accumulator {
    fn new(cells: usize, users: usize, antennas: usize, psi: bool, weights: bool) -> Self {
        let n = cells * users;
        let per_user = if weights { n } else { 0 };
        Self {
            psi: vec![ZERO; if psi { n * antennas * antennas } else { 0 }],
            b: vec![ZERO; n * cells],
            c: vec![ZERO; n * users * cells * cells],
            desired: vec![ZERO; per_user],
            desired_sq: vec![0.0; per_user],
            pc: vec![0.0; per_user],
            ni: vec![0.0; per_user],
        }
    }

    fn add(&mut self, other: &Self) {
        for (a, b) in self.psi.iter_mut().zip(&other.psi) {
            *a += b;
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            *a += b;
        }
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += b;
        }
        for (a, b) in self.desired.iter_mut().zip(&other.desired) {
            *a += b;
        }
        for (a, b) in self.desired_sq.iter_mut().zip(&other.desired_sq) {
            *a += b;
        }
        for (a, b) in self.pc.iter_mut().zip(&other.pc) {
            *a += b;
        }
        for (a, b) in self.ni.iter_mut().zip(&other.ni) {
            *a += b;
        }
    }
}

fn chunk_seed(seed: u64, chunk: usize) -> u64 {
    splitmix64(seed ^ splitmix64(chunk as u64 ^ 0x6d63_626c_6f63_6b73))
}

/// Brute-force sample averages of `b`, `C`, optionally `Psi`, and the SINR
/// terms for `weights`.
pub fn estimate(
    scenario: &NetworkScenario,
    weights: Option<&PrecodingWeights>,
    options: MonteCarloOptions,
) -> Result<MonteCarloEstimate> {
    if options.blocks == 0 {
        return Err(Error::InvalidArgument("at least one block is required".into()));
    }
    let (cells, users, m) = (scenario.cells(), scenario.users_per_cell(), scenario.antennas());
    if let Some(w) = weights {
        if w.cells() != cells || w.users_per_cell() != users {
            return Err(Error::InvalidArgument("weights do not match the scenario".into()));
        }
    }
    let sampler = RealizationSampler::new(scenario)?;
    let n_chunks = options.blocks.div_ceil(CHUNK_BLOCKS);

    let partials: Vec<Accumulator> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let blocks = CHUNK_BLOCKS.min(options.blocks - chunk * CHUNK_BLOCKS);
            let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed(options.seed, chunk));
            let mut acc = Accumulator::new(cells, users, m, options.estimate_psi, weights.is_some());
            let mut real = sampler.empty_realization();
            // x[((l K + k) L + n) K + k'] = z_nk'^H g_lk^n
            let mut x = vec![ZERO; cells * users * cells * users];
            for _ in 0..blocks {
                sampler.sample_into(&mut rng, &mut real);
                accumulate_block(&real, weights, &mut x, &mut acc, options.estimate_psi);
            }
            acc
        })
        .collect();

    let mut total = Accumulator::new(cells, users, m, options.estimate_psi, weights.is_some());
    for p in &partials {
        total.add(p);
    }
    let inv = 1.0 / options.blocks as f64;
    let n = cells * users;

    let psi = options.estimate_psi.then(|| {
        (0..n)
            .map(|i| CMatrix::from_column_slice(m, m, &total.psi[i * m * m..(i + 1) * m * m]).scale(inv))
            .collect()
    });
    let b = (0..n)
        .map(|i| CVector::from_column_slice(&total.b[i * cells..(i + 1) * cells]).scale(inv))
        .collect();
    let c = (0..n * users)
        .map(|i| CMatrix::from_column_slice(cells, cells, &total.c[i * cells * cells..(i + 1) * cells * cells]).scale(inv))
        .collect();
    let sinr = weights.map(|_| {
        (0..n)
            .map(|i| {
                let desired = total.desired[i] * inv;
                SinrEstimate {
                    desired,
                    beamforming_uncertainty: total.desired_sq[i] * inv - desired.norm_sqr(),
                    pilot_contamination: total.pc[i] * inv,
                    noncoherent_interference: total.ni[i] * inv,
                    noise: scenario.sigma2,
                }
            })
            .collect()
    });
    Ok(MonteCarloEstimate {
        blocks: options.blocks,
        cells,
        users_per_cell: users,
        psi,
        b,
        c,
        sinr,
    })
}

fn accumulate_block(
    real: &ChannelRealization,
    weights: Option<&PrecodingWeights>,
    x: &mut [Complex64],
    acc: &mut Accumulator,
    with_psi: bool,
) {
    let (cells, users, m) = (real.cells, real.users_per_cell, real.antennas);
    for l in 0..cells {
        for k in 0..users {
            for n in 0..cells {
                let g = real.g(l, k, n);
                for kp in 0..users {
                    x[((l * users + k) * cells + n) * users + kp] = inner(real.z(n, kp), g);
                }
            }
        }
    }
    let xi = |l: usize, k: usize, n: usize, kp: usize| x[((l * users + k) * cells + n) * users + kp];

    for l in 0..cells {
        for k in 0..users {
            let user = l * users + k;
            for r in 0..cells {
                acc.b[user * cells + r] += xi(l, k, r, k);
            }
            for kp in 0..users {
                let base = (user * users + kp) * cells * cells;
                // column-major (r, n) entry at n * L + r
                for n in 0..cells {
                    let xn = xi(l, k, n, kp).conj();
                    for r in 0..cells {
                        acc.c[base + n * cells + r] += xi(l, k, r, kp) * xn;
                    }
                }
            }
        }
    }

    if with_psi {
        for user in 0..cells * users {
            let z = &real.z[user * m..(user + 1) * m];
            let block = &mut acc.psi[user * m * m..(user + 1) * m * m];
            for j in 0..m {
                let zj = z[j].conj();
                for i in 0..m {
                    block[j * m + i] += z[i] * zj;
                }
            }
        }
    }

    if let Some(w) = weights {
        for l in 0..cells {
            for k in 0..users {
                let user = l * users + k;
                for r in 0..cells {
                    for kp in 0..users {
                        let a = w.a(r, kp);
                        let y: Complex64 = (0..cells).map(|n| a[n].conj() * xi(l, k, n, kp)).sum();
                        if r == l && kp == k {
                            acc.desired[user] += y;
                            acc.desired_sq[user] += y.norm_sqr();
                        } else if kp == k {
                            acc.pc[user] += y.norm_sqr();
                        } else {
                            acc.ni[user] += y.norm_sqr();
                        }
                    }
                }
            }
        }
    }
}

/// Monte Carlo SINR terms for one user. The RNG only supplies the stream
/// seed, so results do not depend on thread count.
pub fn monte_carlo_sinr<R: Rng + ?Sized>(
    scenario: &NetworkScenario,
    weights: &PrecodingWeights,
    l: usize,
    k: usize,
    n_blocks: usize,
    rng: &mut R,
) -> Result<SinrEstimate> {
    scenario.check_user(l, k)?;
    let est = estimate(
        scenario,
        Some(weights),
        MonteCarloOptions {
            blocks: n_blocks,
            seed: rng.random(),
            estimate_psi: false,
        },
    )?;
    Ok(*est.sinr_estimate(l, k).expect("weights were supplied"))
}
