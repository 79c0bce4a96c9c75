//! Network geometry and long-term channel parameters.
//!
//! Every link from user `(l, k)` to base station `r` is Rician:
//! `g = e^{j theta} gbar + g_nlos` with `g_nlos ~ CN(0, R)`. The mean `gbar`
//! points along the uniform-linear-array response at the true angle and `R`
//! follows the Gaussian local scattering model around the same angle. Both are
//! scaled so that `|gbar|^2 + tr(R) = M * beta`.

use std::f64::consts::PI;

use nalgebra::Vector2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::linalg::{psd_repair, real_trace, CMatrix, CVector};

/// Angular standard deviation of the local scattering model (10 degrees).
pub const ANGULAR_SPREAD_RAD: f64 = 10.0 * PI / 180.0;

/// Rejection-sampling attempts per user before a drop is declared infeasible.
pub const MAX_DROP_ATTEMPTS: usize = 10_000;

const SCATTERING_HALF_WIDTH: f64 = 8.0;
const SCATTERING_INTERVALS: usize = 4000;

pub type Point = Vector2<f64>;

/// Pathloss in dB at distance `d` meters: `-30.5 - 36.7 log10(d)`.
pub fn large_scale_gain_db(distance: f64) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "distance must be positive and finite, got {distance}"
        )));
    }
    Ok(-30.5 - 36.7 * distance.log10())
}

/// Linear large-scale gain at distance `d` meters.
pub fn large_scale_gain(distance: f64) -> Result<f64> {
    Ok(10f64.powf(large_scale_gain_db(distance)? / 10.0))
}

/// Linear Rician factor, `13 - 0.03 d` in dB.
pub fn rician_factor(distance: f64) -> f64 {
    10f64.powf((13.0 - 0.03 * distance) / 10.0)
}

/// Half-wavelength ULA response; `|a|^2 = M`.
pub fn ula_response(antennas: usize, angle: f64) -> CVector {
    let s = angle.sin();
    CVector::from_iterator(
        antennas,
        (0..antennas).map(|m| Complex64::from_polar(1.0, PI * m as f64 * s)),
    )
}

/// Gaussian local scattering correlation matrix with unit diagonal.
///
/// Entry `(m, n)` is `E[exp(j pi (m - n) sin(angle + delta))]` with
/// `delta ~ N(0, asd^2)`, integrated by Simpson's rule over `+-8 asd`.
pub fn local_scattering_covariance(antennas: usize, angle: f64, asd: f64) -> CMatrix {
    if antennas == 0 {
        return CMatrix::zeros(0, 0);
    }
    let mut first_col = vec![Complex64::new(0.0, 0.0); antennas];
    if asd == 0.0 {
        let a = ula_response(antennas, angle);
        first_col.copy_from_slice(a.as_slice());
    } else {
        let n = SCATTERING_INTERVALS;
        let h = 2.0 * SCATTERING_HALF_WIDTH * asd / n as f64;
        let mut weights = Vec::with_capacity(n + 1);
        let mut bases = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let delta = -SCATTERING_HALF_WIDTH * asd + i as f64 * h;
            let simpson = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            weights.push(simpson * (-0.5 * (delta / asd).powi(2)).exp());
            bases.push(Complex64::from_polar(1.0, PI * (angle + delta).sin()));
        }
        // normalize so the diagonal is exactly one
        let total: f64 = weights.iter().sum();
        let mut current: Vec<Complex64> = weights.iter().map(|&w| Complex64::new(w / total, 0.0)).collect();
        for entry in first_col.iter_mut() {
            *entry = current.iter().sum();
            for (c, b) in current.iter_mut().zip(&bases) {
                *c *= b;
            }
        }
    }
    CMatrix::from_fn(antennas, antennas, |m, n| {
        if m >= n {
            first_col[m - n]
        } else {
            first_col[n - m].conj()
        }
    })
}

/// Long-term parameters of one user-to-BS link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelComponents {
    /// LOS mean `gbar`.
    pub gbar: CVector,
    /// NLOS covariance `R`.
    pub covariance: CMatrix,
    /// Linear Rician factor.
    pub kappa: f64,
    /// Linear large-scale gain.
    pub beta: f64,
}

impl ChannelComponents {
    /// Splits total gain `beta` into LOS and NLOS parts according to `kappa`.
    /// `kappa = 0` is pure Rayleigh, `kappa = inf` pure LOS.
    pub fn from_gain(antennas: usize, beta: f64, kappa: f64, angle: f64, asd: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be non-negative, got {beta}")));
        }
        if !(kappa >= 0.0) {
            return Err(Error::InvalidArgument(format!("kappa must be non-negative, got {kappa}")));
        }
        let los_share = if kappa.is_infinite() { 1.0 } else { kappa / (kappa + 1.0) };
        let nlos_share = if kappa.is_infinite() { 0.0 } else { 1.0 / (kappa + 1.0) };
        let gbar = ula_response(antennas, angle).scale((beta * los_share).sqrt());
        let covariance = if nlos_share == 0.0 || beta == 0.0 {
            CMatrix::zeros(antennas, antennas)
        } else {
            let shape = psd_repair(&local_scattering_covariance(antennas, angle, asd));
            let target = antennas as f64 * beta * nlos_share;
            let tr = real_trace(&shape);
            shape.scale(target / tr)
        };
        Ok(Self {
            gbar,
            covariance,
            kappa,
            beta,
        })
    }

    /// Total average channel gain `|gbar|^2 + tr(R)`.
    pub fn total_gain(&self) -> f64 {
        self.gbar.norm_squared() + real_trace(&self.covariance)
    }
}

/// Builds the link parameters between a base station and a user position
/// using the urban-microcell pathloss and distance-dependent Rician factor.
pub fn build_channel_components(bs: &Point, user: &Point, antennas: usize) -> Result<ChannelComponents> {
    let diff = user - bs;
    let distance = diff.norm();
    let beta = large_scale_gain(distance)?;
    let kappa = rician_factor(distance);
    let angle = diff.y.atan2(diff.x);
    ChannelComponents::from_gain(antennas, beta, kappa, angle, ANGULAR_SPREAD_RAD)
}

/// Cell-center BS positions on a row-major square grid of `cell_side` squares.
pub fn grid_bs_positions(cells: usize, cell_side: f64) -> Vec<Point> {
    let cols = (cells as f64).sqrt().ceil().max(1.0) as usize;
    (0..cells)
        .map(|l| {
            let (row, col) = (l / cols, l % cols);
            Point::new((col as f64 + 0.5) * cell_side, (row as f64 + 0.5) * cell_side)
        })
        .collect()
}

/// Deterministic per-setup seed derived from `(seed, K, setup_index)`.
pub fn setup_seed(seed: u64, users_per_cell: usize, setup_index: usize) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ users_per_cell as u64);
    splitmix64(h ^ (setup_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Cell geometry plus every link's long-term parameters.
///
/// Links are indexed by `(l, k, r)`: user `k` of cell `l` towards BS `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    cells: usize,
    users_per_cell: usize,
    antennas: usize,
    /// Pilot length.
    pub tau_p: usize,
    /// Pilot power, W.
    pub eta: f64,
    /// Noise power, W.
    pub sigma2: f64,
    pub bs_positions: Vec<Point>,
    /// Row-major `[l][k]`.
    pub user_positions: Vec<Point>,
    links: Vec<ChannelComponents>,
}

impl NetworkScenario {
    /// Assembles a scenario from explicit link parameters in `(l, k, r)` order.
    #[allow(clippy::too_many_arguments)]
    pub fn from_links(
        cells: usize,
        users_per_cell: usize,
        antennas: usize,
        tau_p: usize,
        eta: f64,
        sigma2: f64,
        bs_positions: Vec<Point>,
        user_positions: Vec<Point>,
        links: Vec<ChannelComponents>,
    ) -> Result<Self> {
        if links.len() != cells * users_per_cell * cells {
            return Err(Error::InvalidArgument(format!(
                "expected {} links, got {}",
                cells * users_per_cell * cells,
                links.len()
            )));
        }
        if bs_positions.len() != cells || user_positions.len() != cells * users_per_cell {
            return Err(Error::InvalidArgument("position arrays do not match L and K".into()));
        }
        for link in &links {
            if link.gbar.len() != antennas || link.covariance.shape() != (antennas, antennas) {
                return Err(Error::InvalidArgument("link dimension does not match M".into()));
            }
        }
        if !(eta >= 0.0 && sigma2 >= 0.0) {
            return Err(Error::InvalidArgument("powers must be non-negative".into()));
        }
        Ok(Self {
            cells,
            users_per_cell,
            antennas,
            tau_p,
            eta,
            sigma2,
            bs_positions,
            user_positions,
            links,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn check_user(&self, l: usize, k: usize) -> Result<()> {
        if l >= self.cells {
            return Err(Error::IndexOutOfRange {
                what: "cell",
                index: l,
                limit: self.cells,
            });
        }
        if k >= self.users_per_cell {
            return Err(Error::IndexOutOfRange {
                what: "user",
                index: k,
                limit: self.users_per_cell,
            });
        }
        Ok(())
    }

    fn link_index(&self, l: usize, k: usize, r: usize) -> usize {
        (l * self.users_per_cell + k) * self.cells + r
    }

    /// Link of user `(l, k)` towards BS `r`.
    pub fn link(&self, l: usize, k: usize, r: usize) -> &ChannelComponents {
        &self.links[self.link_index(l, k, r)]
    }

    pub fn gbar(&self, l: usize, k: usize, r: usize) -> &CVector {
        &self.link(l, k, r).gbar
    }

    pub fn covariance(&self, l: usize, k: usize, r: usize) -> &CMatrix {
        &self.link(l, k, r).covariance
    }

    pub fn kappa(&self, l: usize, k: usize, r: usize) -> f64 {
        self.link(l, k, r).kappa
    }

    pub fn beta(&self, l: usize, k: usize, r: usize) -> f64 {
        self.link(l, k, r).beta
    }

    pub fn user_position(&self, l: usize, k: usize) -> &Point {
        &self.user_positions[l * self.users_per_cell + k]
    }

    pub fn links(&self) -> &[ChannelComponents] {
        &self.links
    }

    /// `sqrt(tau_p * eta)`, the pilot amplitude after despreading.
    pub fn pilot_amplitude(&self) -> f64 {
        (self.tau_p as f64 * self.eta).sqrt()
    }
}

/// Drops `K` users per cell and derives all link parameters.
///
/// Users are uniform in the serving cell's square, rejected if they fall
/// closer than `min_bs_distance` to any BS. The result depends only on
/// `(config, setup_index)`.
pub fn generate_scenario(config: &SimulationConfig, setup_index: usize) -> Result<NetworkScenario> {
    config.validate()?;
    let cells = config.cells;
    let users = config.users_per_cell;
    let side = config.cell_side;
    let mut rng = ChaCha8Rng::seed_from_u64(setup_seed(config.seed, users, setup_index));
    let bs_positions = grid_bs_positions(cells, side);

    let mut user_positions = Vec::with_capacity(cells * users);
    for (l, center) in bs_positions.iter().enumerate() {
        let corner = center - Point::new(0.5 * side, 0.5 * side);
        for _ in 0..users {
            let mut attempts = 0;
            let position = loop {
                if attempts == MAX_DROP_ATTEMPTS {
                    return Err(Error::DropRetryExceeded { cell: l, attempts });
                }
                attempts += 1;
                let p = corner + Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side);
                if bs_positions.iter().all(|b| (p - b).norm() >= config.min_bs_distance) {
                    break p;
                }
            };
            user_positions.push(position);
        }
    }

    let mut links = Vec::with_capacity(cells * users * cells);
    for user in &user_positions {
        for bs in &bs_positions {
            links.push(build_channel_components(bs, user, config.antennas)?);
        }
    }

    NetworkScenario::from_links(
        cells,
        users,
        config.antennas,
        config.pilot_length(),
        config.eta,
        config.sigma2,
        bs_positions,
        user_positions,
        links,
    )
}

/// Parameters of a synthetic small scenario with controlled dynamic range.
///
/// Link gains are log-uniform within `+-gain_spread_db` around
/// `reference_gain`, Rician factors log-uniform in `[-10, 10]` dB and angles
/// uniform in `[-pi/2, pi/2)`.
#[derive(Debug, Clone, Copy)]
pub struct ToyScenarioSpec {
    pub cells: usize,
    pub users_per_cell: usize,
    pub antennas: usize,
    pub reference_gain: f64,
    pub gain_spread_db: f64,
    pub eta: f64,
    pub sigma2: f64,
}

impl ToyScenarioSpec {
    pub fn new(cells: usize, users_per_cell: usize, antennas: usize) -> Self {
        Self {
            cells,
            users_per_cell,
            antennas,
            reference_gain: 1e-10,
            gain_spread_db: 5.0,
            eta: 0.05,
            sigma2: crate::config::DEFAULT_NOISE_POWER_W,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<NetworkScenario> {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x746f_7973_6365_6e65));
        let (cells, users, antennas) = (self.cells, self.users_per_cell, self.antennas);
        let bs_positions = grid_bs_positions(cells, 100.0);
        let user_positions = (0..cells * users)
            .map(|i| bs_positions[i / users.max(1)] + Point::new(30.0, 0.0))
            .collect();
        let mut links = Vec::with_capacity(cells * users * cells);
        for _ in 0..cells * users * cells {
            let gain_db = rng.random_range(-self.gain_spread_db..=self.gain_spread_db);
            let beta = self.reference_gain * 10f64.powf(gain_db / 10.0);
            let kappa = 10f64.powf(rng.random_range(-1.0..=1.0));
            let angle = rng.random_range(-0.5 * PI..0.5 * PI);
            links.push(ChannelComponents::from_gain(antennas, beta, kappa, angle, ANGULAR_SPREAD_RAD)?);
        }
        NetworkScenario::from_links(
            cells,
            users,
            antennas,
            users,
            self.eta,
            self.sigma2,
            bs_positions,
            user_positions,
            links,
        )
    }
}
