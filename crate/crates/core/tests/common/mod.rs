//! Helpers shared by the integration tests: random instances at unit scale
//! and definition-level reimplementations used as oracles.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ris_cellfree::channel::{default_bs_positions, default_ris_positions, ChannelSet, Dimensions, ScenarioConfig};
use ris_cellfree::fp::{ActiveQuadratic, PassiveQuadratic};
use ris_cellfree::linalg::hermitian_eigenvalues;
use ris_cellfree::linalg::{CMatrix, CVector, C64};
use ris_cellfree::metrics::per_bs_power;
use ris_cellfree::solvers::project_unit_disk;
use ris_cellfree::{PhaseConfig, PhaseMode, Precoder};

pub type CM = CMatrix;
pub type CV = CVector;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cn<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CM {
    CM::from_fn(rows, cols, |_, _| cn(rng))
}

pub fn random_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> CV {
    CV::from_fn(len, |_, _| cn(rng))
}

/// Unit-variance channels of the given shape; no path loss.
pub fn unit_channels<R: Rng + ?Sized>(dims: Dimensions, rng: &mut R) -> ChannelSet {
    let (b, r, k, p) = (dims.num_bs, dims.num_ris, dims.num_users, dims.num_subcarriers);
    let (m, u, n) = (dims.bs_antennas, dims.user_antennas, dims.ris_elements);
    let direct = (0..b * k * p).map(|_| random_matrix(m, u, rng)).collect();
    let bs_ris = (0..b * r * p).map(|_| random_matrix(n, m, rng)).collect();
    let ris_user = (0..r * k * p).map(|_| random_matrix(n, u, rng)).collect();
    ChannelSet::new(dims, direct, bs_ris, ris_user).unwrap()
}

/// Scenario matching `dims` with unit noise and budgets, for use with
/// [`unit_channels`].
pub fn unit_scenario(dims: Dimensions) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::reference();
    cfg.dims = dims;
    cfg.bs_positions = default_bs_positions()[..dims.num_bs].to_vec();
    cfg.ris_positions = default_ris_positions()[..dims.num_ris].to_vec();
    cfg.max_power = vec![1.0; dims.num_bs];
    cfg.noise_power = 1.0;
    cfg.weights = vec![1.0; dims.num_users];
    cfg
}

pub fn random_precoder<R: Rng + ?Sized>(dims: &Dimensions, rng: &mut R) -> Precoder {
    Precoder::from_fn(dims, |_, _| random_vector(dims.stacked_tx(), rng)).unwrap()
}

pub fn random_phases<R: Rng + ?Sized>(len: usize, rng: &mut R) -> PhaseConfig {
    let theta = CV::from_fn(len, |_, _| {
        let r: f64 = rng.random::<f64>().sqrt();
        C64::from_polar(r, rng.random::<f64>() * std::f64::consts::TAU)
    });
    PhaseConfig { theta, mode: PhaseMode::Relaxed }
}

pub fn small_dims<R: Rng + ?Sized>(rng: &mut R) -> Dimensions {
    Dimensions {
        num_bs: rng.random_range(1..=2),
        num_ris: rng.random_range(0..=2),
        num_users: rng.random_range(1..=3),
        num_subcarriers: rng.random_range(1..=2),
        bs_antennas: rng.random_range(1..=3),
        user_antennas: rng.random_range(1..=2),
        ris_elements: rng.random_range(1..=4),
    }
}

/// `q_j = Σ_b H_{b,k,p}ᴴ w_{b,p,j} + Σ_r F_{r,k,p}ᴴ Θ_rᴴ Σ_b G_{b,r,p} w_{b,p,j}`,
/// evaluated link by link from the unstacked matrices.
pub fn received_by_links(ch: &ChannelSet, theta: &CV, w: &Precoder, k: usize, p: usize) -> Vec<CV> {
    let d = *ch.dims();
    let m = d.bs_antennas;
    let n = d.ris_elements;
    (0..d.num_users)
        .map(|j| {
            let wj = w.get(p, j);
            let mut q = CV::zeros(d.user_antennas);
            for b in 0..d.num_bs {
                let wb = wj.rows(b * m, m).into_owned();
                q += ch.h(b, k, p).adjoint() * &wb;
            }
            for r in 0..d.num_ris {
                let mut at_ris = CV::zeros(n);
                for b in 0..d.num_bs {
                    let wb = wj.rows(b * m, m).into_owned();
                    at_ris += ch.g(b, r, p) * &wb;
                }
                let reflected = CV::from_fn(n, |i, _| theta[r * n + i].conj() * at_ris[i]);
                q += ch.f(r, k, p).adjoint() * reflected;
            }
            q
        })
        .collect()
}

/// `qᴴ C⁻¹ q` for a 1×1 or 2×2 Hermitian `C`, by the cofactor formula.
pub fn quad_inverse_small(c: &CM, q: &CV) -> f64 {
    match c.nrows() {
        1 => q[0].norm_sqr() / c[(0, 0)].re,
        2 => {
            let det = (c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)]).re;
            let adj = CM::from_row_slice(2, 2, &[c[(1, 1)], -c[(0, 1)], -c[(1, 0)], c[(0, 0)]]);
            (q.adjoint() * adj * q)[(0, 0)].re / det
        }
        n => panic!("cofactor oracle handles U ≤ 2, got {n}"),
    }
}

/// SINR from its definition with an explicit small-matrix inverse.
pub fn sinr_oracle(ch: &ChannelSet, theta: &CV, w: &Precoder, k: usize, p: usize, noise: f64) -> f64 {
    let q = received_by_links(ch, theta, w, k, p);
    let u = q[k].len();
    let mut c = CM::identity(u, u) * C64::from(noise);
    for (j, qj) in q.iter().enumerate() {
        if j != k {
            c += qj * qj.adjoint();
        }
    }
    quad_inverse_small(&c, &q[k])
}

pub fn wsr_oracle(ch: &ChannelSet, theta: &CV, w: &Precoder, noise: f64, weights: &[f64]) -> f64 {
    let d = *ch.dims();
    let mut total = 0.0;
    for k in 0..d.num_users {
        for p in 0..d.num_subcarriers {
            total += weights[k] * (1.0 + sinr_oracle(ch, theta, w, k, p, noise)).log2();
        }
    }
    total
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn active_dims(num_bs: usize, bs_antennas: usize, num_users: usize, num_subcarriers: usize) -> Dimensions {
    Dimensions { num_bs, num_ris: 0, num_users, num_subcarriers, bs_antennas, user_antennas: 1, ris_elements: 1 }
}

/// Random active quadratic; `rank` rank-one terms per block, so blocks are
/// singular when `rank < B·M`.
pub fn random_active<R: Rng>(d: &Dimensions, rank: usize, rng: &mut R) -> ActiveQuadratic {
    let n = d.stacked_tx();
    let a = (0..d.num_subcarriers)
        .map(|_| {
            let x = random_matrix(n, rank, rng);
            &x * x.adjoint()
        })
        .collect();
    ActiveQuadratic { a, v: random_precoder(d, rng), y: 0.0, mu: vec![1.0; d.num_users * d.num_subcarriers] }
}

/// Projects onto the per-BS power budgets by scaling each BS block.
pub fn project_power(w: &mut Precoder, caps: &[f64]) {
    let power = per_bs_power(w);
    let m = w.bs_antennas();
    for (b, (&p, &cap)) in power.iter().zip(caps).enumerate() {
        if p > cap {
            let s = C64::from((cap / p).sqrt());
            for x in w.iter_mut() {
                for i in b * m..(b + 1) * m {
                    x[i] *= s;
                }
            }
        }
    }
}

/// Projected gradient ascent with Armijo backtracking; independent of the
/// dual machinery in the library.
pub fn projected_gradient_oracle(quad: &ActiveQuadratic, caps: &[f64], tol: f64) -> f64 {
    let mut w = quad.v.clone();
    for x in w.iter_mut() {
        x.fill(C64::new(0.0, 0.0));
    }
    let mut value = quad.objective(&w);
    let mut step = 1.0;
    for _ in 0..500_000 {
        let mut grad = quad.v.clone();
        for (p, a) in quad.a.iter().enumerate() {
            for k in 0..w.num_users() {
                *grad.get_mut(p, k) -= a * w.get(p, k);
            }
        }
        loop {
            let mut trial = w.clone();
            for (t, g) in trial.iter_mut().zip(grad.iter()) {
                *t += g * C64::from(step);
            }
            project_power(&mut trial, caps);
            let slope: f64 =
                trial.iter().zip(w.iter()).zip(grad.iter()).map(|((t, x), g)| 2.0 * g.dotc(&(t - x)).re).sum();
            let moved: f64 = trial.iter().zip(w.iter()).map(|(t, x)| (t - x).norm_squared()).sum::<f64>().sqrt();
            let trial_value = quad.objective(&trial);
            if trial_value >= value + 1e-4 * slope || moved < 1e-15 {
                let done = moved / step < tol;
                w = trial;
                value = trial_value;
                step *= 2.0;
                if done {
                    return value;
                }
                break;
            }
            step *= 0.5;
        }
    }
    value
}

pub fn random_passive<R: Rng>(n: usize, rank: usize, rng: &mut R) -> PassiveQuadratic {
    let x = random_matrix(n, rank, rng);
    PassiveQuadratic {
        lambda: &x * x.adjoint(),
        nu: random_vector(n, rng) * C64::from(2.0),
        zeta: 0.0,
        c: vec![],
        g: vec![],
    }
}

/// Two-level dense grid over `|θ_n| ≤ 1` for two entries: 65 radii × 65
/// phases per entry, then the same grid again around the best coarse cell.
pub fn passive_grid_oracle(q: &PassiveQuadratic) -> f64 {
    let tau = std::f64::consts::TAU;
    let search = |r_lo: [f64; 2], r_hi: [f64; 2], p_lo: [f64; 2], p_hi: [f64; 2]| {
        let mut best = (f64::NEG_INFINITY, [0.0; 4]);
        let pts = |lo: f64, hi: f64| (0..65).map(move |i| lo + (hi - lo) * i as f64 / 64.0);
        for r0 in pts(r_lo[0], r_hi[0]) {
            for a0 in pts(p_lo[0], p_hi[0]) {
                let t0 = C64::from_polar(r0, a0);
                for r1 in pts(r_lo[1], r_hi[1]) {
                    for a1 in pts(p_lo[1], p_hi[1]) {
                        let theta = CV::from_vec(vec![t0, C64::from_polar(r1, a1)]);
                        let v = q.objective(&theta);
                        if v > best.0 {
                            best = (v, [r0, a0, r1, a1]);
                        }
                    }
                }
            }
        }
        best
    };
    let (_, c) = search([0.0; 2], [1.0; 2], [0.0; 2], [tau; 2]);
    let (dr, da) = (1.0 / 64.0, tau / 64.0);
    let (fine, _) = search(
        [(c[0] - dr).max(0.0), (c[2] - dr).max(0.0)],
        [(c[0] + dr).min(1.0), (c[2] + dr).min(1.0)],
        [c[1] - da, c[3] - da],
        [c[1] + da, c[3] + da],
    );
    fine
}

/// Gradient-mapping norm with the exact top eigenvalue, relative to `max(‖ν‖, L)`.
pub fn passive_mapping(q: &PassiveQuadratic, theta: &CV) -> f64 {
    let l = hermitian_eigenvalues(&q.lambda).last().copied().unwrap_or(0.0).max(1e-300);
    let grad = &q.nu - &q.lambda * theta;
    let moved = project_unit_disk(&(theta + grad / C64::from(l)));
    (theta - moved).norm() * l / q.nu.norm().max(l)
}
