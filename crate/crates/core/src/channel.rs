//! Scenario geometry and the statistical channel model.
//!
//! Three link classes are generated per subcarrier:
//!
//! * BS → user (`H`): i.i.d. Rayleigh, redrawn for every subcarrier.
//! * BS → RIS (`G`): rank-one line-of-sight built from uniform-linear-array
//!   steering vectors, identical on every subcarrier.
//! * RIS → user (`F`): i.i.d. Rayleigh, redrawn for every subcarrier.
//!
//! Every link is scaled by a log-distance path loss. Randomness comes from
//! ChaCha8 streams keyed by `(seed, RngStream)`; see [`rng_stream`] for the
//! draw order inside each stream.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};

/// A point in the plane, meters.
pub type Point = [f64; 2];

/// Problem dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dimensions {
    pub num_bs: usize,
    /// May be zero (conventional cell-free network).
    pub num_ris: usize,
    pub num_users: usize,
    pub num_subcarriers: usize,
    pub bs_antennas: usize,
    pub user_antennas: usize,
    pub ris_elements: usize,
}

impl Dimensions {
    /// Length of a stacked precoding vector `w_{p,k}` (all BS antennas).
    pub fn stacked_tx(&self) -> usize {
        self.num_bs * self.bs_antennas
    }

    /// Length of the stacked reflection vector `θ` (all RIS elements).
    pub fn stacked_ris(&self) -> usize {
        self.num_ris * self.ris_elements
    }

    /// Index of `(k, p)` in user-major per-subcarrier storage.
    pub fn kp(&self, k: usize, p: usize) -> usize {
        k * self.num_subcarriers + p
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("num_bs", self.num_bs),
            ("num_users", self.num_users),
            ("num_subcarriers", self.num_subcarriers),
            ("bs_antennas", self.bs_antennas),
            ("user_antennas", self.user_antennas),
            ("ris_elements", self.ris_elements),
        ];
        for (name, v) in named {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Log-distance path-loss parameters for one link class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    /// Attenuation at the 1 m reference distance, dB.
    pub ref_loss_db: f64,
    pub exponent: f64,
}

impl PathLoss {
    pub fn gain_db(&self, distance_m: f64) -> Result<f64> {
        path_gain_db(distance_m, self.ref_loss_db, self.exponent)
    }

    /// Linear amplitude gain `10^(-dB/20)` at `distance_m`.
    pub fn amplitude(&self, distance_m: f64) -> Result<f64> {
        Ok(10f64.powf(-self.gain_db(distance_m)? / 20.0))
    }
}

/// Complete description of one simulated deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub dims: Dimensions,
    pub bs_positions: Vec<Point>,
    pub ris_positions: Vec<Point>,
    pub user_circle_center: Point,
    pub user_circle_radius: f64,
    /// Per-BS power budget, watts.
    pub max_power: Vec<f64>,
    /// Noise power σ², watts.
    pub noise_power: f64,
    /// User weights η_k.
    pub weights: Vec<f64>,
    pub bs_user: PathLoss,
    pub bs_ris: PathLoss,
    pub ris_user: PathLoss,
    pub seed: u64,
}

/// Converts a dB power ratio to linear.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

impl ScenarioConfig {
    /// Two BSs, two RISs, four users on a 1 m disk at `(40, 0)`; eight BS
    /// antennas, two user antennas, 32 RIS elements, six subcarriers,
    /// 0 dB per-BS budget and -120 dBm noise.
    pub fn reference() -> Self {
        let dims = Dimensions {
            num_bs: 2,
            num_ris: 2,
            num_users: 4,
            num_subcarriers: 6,
            bs_antennas: 8,
            user_antennas: 2,
            ris_elements: 32,
        };
        ScenarioConfig {
            dims,
            bs_positions: default_bs_positions(),
            ris_positions: default_ris_positions(),
            user_circle_center: [40.0, 0.0],
            user_circle_radius: 1.0,
            max_power: vec![db_to_linear(0.0); dims.num_bs],
            noise_power: dbm_to_watts(-120.0),
            weights: vec![1.0; dims.num_users],
            bs_user: PathLoss { ref_loss_db: 30.0, exponent: 3.0 },
            bs_ris: PathLoss { ref_loss_db: 20.0, exponent: 2.0 },
            ris_user: PathLoss { ref_loss_db: 20.0, exponent: 2.0 },
            seed: 0,
        }
    }

    /// Same scenario with every RIS removed.
    pub fn without_ris(&self) -> Self {
        let mut out = self.clone();
        out.dims.num_ris = 0;
        out.ris_positions.clear();
        out
    }

    /// Same scenario with the user disk centered at `(distance_m, 0)`.
    pub fn at_distance(&self, distance_m: f64) -> Self {
        let mut out = self.clone();
        out.user_circle_center = [distance_m, 0.0];
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let d = &self.dims;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.bs_positions.len() != d.num_bs {
            return bad(format!("expected {} BS positions, got {}", d.num_bs, self.bs_positions.len()));
        }
        if self.ris_positions.len() != d.num_ris {
            return bad(format!("expected {} RIS positions, got {}", d.num_ris, self.ris_positions.len()));
        }
        if self.max_power.len() != d.num_bs {
            return bad(format!("expected {} power budgets, got {}", d.num_bs, self.max_power.len()));
        }
        if self.weights.len() != d.num_users {
            return bad(format!("expected {} user weights, got {}", d.num_users, self.weights.len()));
        }
        if !self.max_power.iter().all(|&p| p > 0.0 && p.is_finite()) {
            return bad("power budgets must be positive".into());
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return bad("noise power must be positive".into());
        }
        if !self.weights.iter().all(|&w| w > 0.0 && w.is_finite()) {
            return bad("user weights must be positive".into());
        }
        for (name, pl) in [("BS-user", self.bs_user), ("BS-RIS", self.bs_ris), ("RIS-user", self.ris_user)] {
            if !(pl.exponent > 0.0) || !pl.ref_loss_db.is_finite() {
                return bad(format!("{name} path loss needs a finite reference and positive exponent"));
            }
        }
        if !(self.user_circle_radius >= 0.0) {
            return bad("user circle radius must be non-negative".into());
        }
        Ok(())
    }
}

pub fn default_bs_positions() -> Vec<Point> {
    vec![[0.0, 10.0], [0.0, -10.0]]
}

pub fn default_ris_positions() -> Vec<Point> {
    vec![[30.0, 5.0], [50.0, -5.0]]
}

/// Independent random streams derived from one scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngStream {
    UserPlacement = 1,
    Channels = 2,
    Initialization = 3,
}

/// ChaCha8 generator for `(seed, stream)`.
///
/// Draw order inside [`RngStream::Channels`]: every `H[b,k,p]` with `b`
/// outermost and `p` innermost, then every `F[r,k,p]` in the same nesting.
/// Each matrix is filled column-major, real part before imaginary part.
pub fn rng_stream(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Samples `num_users` points uniformly on the user disk.
pub fn place_users<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Vec<Point> {
    let [cx, cy] = config.user_circle_center;
    (0..config.dims.num_users)
        .map(|_| {
            let u: f64 = rng.random();
            let phi: f64 = rng.random::<f64>() * 2.0 * PI;
            let r = config.user_circle_radius * u.sqrt();
            [cx + r * phi.cos(), cy + r * phi.sin()]
        })
        .collect()
}

/// Log-distance attenuation in dB: `ref + 10·exponent·log10(d / 1 m)`.
pub fn path_gain_db(distance_m: f64, ref_loss_db: f64, exponent: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::Domain(format!("distance must be positive, got {distance_m}")));
    }
    Ok(ref_loss_db + 10.0 * exponent * distance_m.log10())
}

/// i.i.d. CN(0, gain²) matrix.
pub fn sample_rayleigh<R: Rng + ?Sized>(rows: usize, cols: usize, amplitude_gain: f64, rng: &mut R) -> CMatrix {
    let s = amplitude_gain * std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(s * re, s * im)
    })
}

/// Half-wavelength ULA response at azimuth `angle` (radians from boresight).
pub fn ula_response(len: usize, angle: f64) -> CVector {
    let step = PI * angle.sin();
    CVector::from_fn(len, |n, _| C64::from_polar(1.0, step * n as f64))
}

fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Rank-one line-of-sight matrix `g · a_rx a_txᴴ` of shape `rx_len × tx_len`.
///
/// Both arrays lie along the y axis, so boresight is the x direction. The
/// departure angle is measured from `tx` towards `rx`, the arrival angle
/// from `rx` back towards `tx`.
pub fn sample_los(tx_len: usize, rx_len: usize, amplitude_gain: f64, tx: Point, rx: Point) -> Result<CMatrix> {
    let (dx, dy) = (rx[0] - tx[0], rx[1] - tx[1]);
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::Domain("line-of-sight endpoints coincide".into()));
    }
    let a_tx = ula_response(tx_len, dy.atan2(dx));
    let a_rx = ula_response(rx_len, (-dy).atan2(-dx));
    Ok(a_rx * a_tx.adjoint() * C64::from(amplitude_gain))
}

/// Frequency-domain channels for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    dims: Dimensions,
    /// `H[b,k,p]`, M×U.
    direct: Vec<CMatrix>,
    /// `G[b,r,p]`, N×M.
    bs_ris: Vec<CMatrix>,
    /// `F[r,k,p]`, N×U.
    ris_user: Vec<CMatrix>,
    // Stacked views used by the metrics and transforms.
    stacked_direct: Vec<CMatrix>,
    stacked_ris_user: Vec<CMatrix>,
    stacked_bs_ris: Vec<CMatrix>,
}

impl ChannelSet {
    /// Builds a channel set from per-link matrices laid out as
    /// `direct[(b*K + k)*P + p]`, `bs_ris[(b*R + r)*P + p]` and
    /// `ris_user[(r*K + k)*P + p]`.
    pub fn new(dims: Dimensions, direct: Vec<CMatrix>, bs_ris: Vec<CMatrix>, ris_user: Vec<CMatrix>) -> Result<Self> {
        dims.validate()?;
        let Dimensions {
            num_bs: b,
            num_ris: r,
            num_users: k,
            num_subcarriers: p,
            bs_antennas: m,
            user_antennas: u,
            ris_elements: n,
        } = dims;
        let check = |what: &str, mats: &[CMatrix], count: usize, shape: (usize, usize)| -> Result<()> {
            if mats.len() != count {
                return Err(Error::Contract(format!("{what}: expected {count} matrices, got {}", mats.len())));
            }
            if let Some(bad) = mats.iter().find(|x| x.shape() != shape) {
                return Err(Error::Contract(format!("{what}: expected {shape:?} blocks, got {:?}", bad.shape())));
            }
            if mats.iter().any(|x| x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())) {
                return Err(Error::Contract(format!("{what}: non-finite entry")));
            }
            Ok(())
        };
        check("H", &direct, b * k * p, (m, u))?;
        check("G", &bs_ris, b * r * p, (n, m))?;
        check("F", &ris_user, r * k * p, (n, u))?;

        let mut set = ChannelSet {
            dims,
            direct,
            bs_ris,
            ris_user,
            stacked_direct: Vec::with_capacity(k * p),
            stacked_ris_user: Vec::with_capacity(k * p),
            stacked_bs_ris: Vec::with_capacity(p),
        };
        for kk in 0..k {
            for pp in 0..p {
                let mut d = CMatrix::zeros(b * m, u);
                for bb in 0..b {
                    d.view_mut((bb * m, 0), (m, u)).copy_from(set.h(bb, kk, pp));
                }
                set.stacked_direct.push(d);
                let mut f = CMatrix::zeros(r * n, u);
                for rr in 0..r {
                    f.view_mut((rr * n, 0), (n, u)).copy_from(set.f(rr, kk, pp));
                }
                set.stacked_ris_user.push(f);
            }
        }
        for pp in 0..p {
            let mut g = CMatrix::zeros(r * n, b * m);
            for rr in 0..r {
                for bb in 0..b {
                    g.view_mut((rr * n, bb * m), (n, m)).copy_from(set.g(bb, rr, pp));
                }
            }
            set.stacked_bs_ris.push(g);
        }
        Ok(set)
    }

    pub fn dims(&self) -> &Dimensions {
        &self.dims
    }

    /// Direct channel `H[b,k,p]` (M×U).
    pub fn h(&self, b: usize, k: usize, p: usize) -> &CMatrix {
        let d = &self.dims;
        &self.direct[(b * d.num_users + k) * d.num_subcarriers + p]
    }

    /// BS → RIS channel `G[b,r,p]` (N×M).
    pub fn g(&self, b: usize, r: usize, p: usize) -> &CMatrix {
        let d = &self.dims;
        &self.bs_ris[(b * d.num_ris + r) * d.num_subcarriers + p]
    }

    /// RIS → user channel `F[r,k,p]` (N×U).
    pub fn f(&self, r: usize, k: usize, p: usize) -> &CMatrix {
        let d = &self.dims;
        &self.ris_user[(r * d.num_users + k) * d.num_subcarriers + p]
    }

    /// `[H_{1,k,p}; …; H_{B,k,p}]`, (B·M)×U.
    pub fn stacked_direct(&self, k: usize, p: usize) -> &CMatrix {
        &self.stacked_direct[self.dims.kp(k, p)]
    }

    /// `F_{k,p} = [F_{1,k,p}; …; F_{R,k,p}]`, (R·N)×U.
    pub fn stacked_ris_user(&self, k: usize, p: usize) -> &CMatrix {
        &self.stacked_ris_user[self.dims.kp(k, p)]
    }

    /// `G_p`, (R·N)×(B·M) with block `(r, b)` equal to `G[b,r,p]`.
    pub fn stacked_bs_ris(&self, p: usize) -> &CMatrix {
        &self.stacked_bs_ris[p]
    }
}

/// Draws one channel realization for users at `user_positions`.
pub fn generate_channels<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    user_positions: &[Point],
    rng: &mut R,
) -> Result<ChannelSet> {
    config.validate()?;
    let d = config.dims;
    if user_positions.len() != d.num_users {
        return Err(Error::Contract(format!("expected {} user positions, got {}", d.num_users, user_positions.len())));
    }
    let mut direct = Vec::with_capacity(d.num_bs * d.num_users * d.num_subcarriers);
    for &bs in &config.bs_positions {
        for &user in user_positions {
            let gain = config.bs_user.amplitude(distance(bs, user))?;
            for _ in 0..d.num_subcarriers {
                direct.push(sample_rayleigh(d.bs_antennas, d.user_antennas, gain, rng));
            }
        }
    }
    let mut bs_ris = Vec::with_capacity(d.num_bs * d.num_ris * d.num_subcarriers);
    for &bs in &config.bs_positions {
        for &ris in &config.ris_positions {
            let gain = config.bs_ris.amplitude(distance(bs, ris))?;
            let los = sample_los(d.bs_antennas, d.ris_elements, gain, bs, ris)?;
            bs_ris.extend(std::iter::repeat_n(los, d.num_subcarriers));
        }
    }
    let mut ris_user = Vec::with_capacity(d.num_ris * d.num_users * d.num_subcarriers);
    for &ris in &config.ris_positions {
        for &user in user_positions {
            let gain = config.ris_user.amplitude(distance(ris, user))?;
            for _ in 0..d.num_subcarriers {
                ris_user.push(sample_rayleigh(d.ris_elements, d.user_antennas, gain, rng));
            }
        }
    }
    ChannelSet::new(d, direct, bs_ris, ris_user)
}

/// User placement and channel draw for a scenario, both from its seed.
pub fn realize(config: &ScenarioConfig) -> Result<(Vec<Point>, ChannelSet)> {
    let users = place_users(config, &mut rng_stream(config.seed, RngStream::UserPlacement));
    let channels = generate_channels(config, &users, &mut rng_stream(config.seed, RngStream::Channels))?;
    Ok((users, channels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_radius_puts_everyone_at_center() {
        let mut cfg = ScenarioConfig::reference();
        cfg.user_circle_radius = 0.0;
        let users = place_users(&cfg, &mut rng_stream(3, RngStream::UserPlacement));
        assert_eq!(users.len(), 4);
        assert!(users.iter().all(|&u| u == [40.0, 0.0]));
    }

    #[test]
    fn single_user_lands_in_disk() {
        let mut cfg = ScenarioConfig::reference();
        cfg.dims.num_users = 1;
        for seed in 0..200 {
            let u = place_users(&cfg, &mut rng_stream(seed, RngStream::UserPlacement))[0];
            assert!(distance(u, [40.0, 0.0]) <= 1.0);
        }
    }

    #[test]
    fn placement_is_deterministic() {
        let cfg = ScenarioConfig::reference();
        let a = place_users(&cfg, &mut rng_stream(9, RngStream::UserPlacement));
        let b = place_users(&cfg, &mut rng_stream(9, RngStream::UserPlacement));
        assert_eq!(a, b);
    }

    #[test]
    fn path_gain_values() {
        assert_eq!(path_gain_db(1.0, 30.0, 3.0).unwrap(), 30.0);
        assert!((path_gain_db(10.0, 30.0, 3.0).unwrap() - 60.0).abs() < 1e-12);
        assert_eq!(path_gain_db(1.0, 40.0, 2.0).unwrap(), 40.0);
        assert!(matches!(path_gain_db(0.0, 30.0, 3.0), Err(Error::Domain(_))));
        assert!(matches!(path_gain_db(-2.0, 30.0, 3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rayleigh_zero_gain_is_zero() {
        let m = sample_rayleigh(3, 2, 0.0, &mut rng_stream(0, RngStream::Channels));
        assert!(m.iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn rayleigh_unit_variance() {
        let m = sample_rayleigh(1000, 1000, 1.0, &mut rng_stream(5, RngStream::Channels));
        let var = m.iter().map(|v| v.norm_sqr()).sum::<f64>() / 1e6;
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
        let mean = m.iter().sum::<C64>() / C64::from(1e6);
        assert!(mean.norm() < 0.005);
    }

    #[test]
    fn rayleigh_reproducible() {
        let a = sample_rayleigh(4, 3, 0.7, &mut rng_stream(11, RngStream::Channels));
        let b = sample_rayleigh(4, 3, 0.7, &mut rng_stream(11, RngStream::Channels));
        assert_eq!(a, b);
    }

    #[test]
    fn los_is_rank_one_with_constant_modulus() {
        let g = sample_los(4, 6, 0.25, [0.0, 10.0], [30.0, 5.0]).unwrap();
        assert_eq!(g.shape(), (6, 4));
        assert!(g.iter().all(|v| (v.norm() - 0.25).abs() < 1e-14));
        let sv = g.clone().svd(false, false).singular_values;
        assert!(sv[1] < 1e-12 * sv[0]);
    }

    #[test]
    fn los_boresight_has_equal_phases() {
        let g = sample_los(3, 5, 1.0, [0.0, 0.0], [20.0, 0.0]).unwrap();
        let first = g[(0, 0)];
        assert!(g.iter().all(|v| (v - first).norm() < 1e-12));
    }

    #[test]
    fn los_rejects_coincident_endpoints() {
        assert!(matches!(sample_los(2, 2, 1.0, [1.0, 1.0], [1.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn no_ris_leaves_cascade_empty() {
        let mut cfg = ScenarioConfig::reference().without_ris();
        cfg.dims.num_subcarriers = 2;
        let (_, ch) = realize(&cfg).unwrap();
        assert!(ch.bs_ris.is_empty() && ch.ris_user.is_empty());
        assert_eq!(ch.direct.len(), 2 * 4 * 2);
        assert_eq!(ch.stacked_ris_user(0, 0).shape(), (0, 2));
        assert_eq!(ch.stacked_bs_ris(1).shape(), (0, 16));
    }

    #[test]
    fn channels_are_deterministic_and_los_is_flat_in_frequency() {
        let mut cfg = ScenarioConfig::reference();
        cfg.dims.num_subcarriers = 3;
        cfg.dims.ris_elements = 4;
        cfg.seed = 77;
        let (_, a) = realize(&cfg).unwrap();
        let (_, b) = realize(&cfg).unwrap();
        assert_eq!(a, b);
        for bb in 0..2 {
            for rr in 0..2 {
                assert_eq!(a.g(bb, rr, 0), a.g(bb, rr, 2));
            }
        }
        assert_ne!(a.h(0, 0, 0), a.h(0, 0, 1));
    }

    #[test]
    fn stacked_blocks_line_up() {
        let mut cfg = ScenarioConfig::reference();
        cfg.dims = Dimensions {
            num_bs: 2,
            num_ris: 2,
            num_users: 2,
            num_subcarriers: 2,
            bs_antennas: 3,
            user_antennas: 2,
            ris_elements: 4,
        };
        cfg.weights = vec![1.0; 2];
        let (_, ch) = realize(&cfg).unwrap();
        let g = ch.stacked_bs_ris(1);
        assert_eq!(g.view((4, 3), (4, 3)).into_owned(), *ch.g(1, 1, 1));
        assert_eq!(g.view((0, 3), (4, 3)).into_owned(), *ch.g(1, 0, 1));
        let d = ch.stacked_direct(1, 0);
        assert_eq!(d.view((3, 0), (3, 2)).into_owned(), *ch.h(1, 1, 0));
        let f = ch.stacked_ris_user(0, 1);
        assert_eq!(f.view((4, 0), (4, 2)).into_owned(), *ch.f(1, 0, 1));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let dims = Dimensions {
            num_bs: 1,
            num_ris: 0,
            num_users: 1,
            num_subcarriers: 1,
            bs_antennas: 2,
            user_antennas: 1,
            ris_elements: 1,
        };
        let err = ChannelSet::new(dims, vec![CMatrix::zeros(1, 1)], vec![], vec![]);
        assert!(matches!(err, Err(Error::Contract(_))));
    }
}
