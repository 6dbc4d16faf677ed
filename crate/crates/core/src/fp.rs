//! Fractional-programming transforms behind the alternating optimizer.
//!
//! The weighted sum-rate is first decoupled with a Lagrangian dual transform
//! (auxiliary SINR variables `ρ`). With `ρ` fixed, both the precoder and the
//! reflection subproblems maximize `Σ μ_{k,p} f_{k,p}` where
//! `μ_{k,p} = η_k (1 + ρ_{k,p})`; a multidimensional quadratic transform
//! (auxiliary vectors `ξ` for the precoder, `ϖ` for the reflection vector)
//! turns each of those into a concave quadratic.

use std::f64::consts::LN_2;

use crate::channel::{ChannelSet, Dimensions};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::metrics::{check_noise, covariance, effective_channel, whitened, EffectiveChannel, PhaseConfig, Precoder};

/// Auxiliary variables, each indexed by `dims.kp(k, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxState {
    pub rho: Vec<f64>,
    pub xi: Vec<CVector>,
    pub varpi: Vec<CVector>,
}

/// `ρ_{k,p} = γ_{k,p}`, clamped at zero.
pub fn update_rho(h: &EffectiveChannel, w: &Precoder, noise_power: f64) -> Result<Vec<f64>> {
    Ok(crate::metrics::sinr_all(h, w, noise_power)?.into_iter().map(|g| g.max(0.0)).collect())
}

/// `μ_{k,p} = η_k (1 + ρ_{k,p})`.
pub fn mu_weights(dims: &Dimensions, weights: &[f64], rho: &[f64]) -> Vec<f64> {
    let mut mu = vec![0.0; dims.num_users * dims.num_subcarriers];
    for k in 0..dims.num_users {
        for p in 0..dims.num_subcarriers {
            let i = dims.kp(k, p);
            mu[i] = weights[k] * (1.0 + rho[i]);
        }
    }
    mu
}

/// `f_{k,p} = q_kᴴ (Σ_j q_j q_jᴴ + σ² I)⁻¹ q_k` with `q_j = h_{k,p}ᴴ w_{p,j}`.
/// Always in `[0, 1)`; equals `γ/(1+γ)`.
pub fn f_kp(h: &EffectiveChannel, w: &Precoder, k: usize, p: usize, noise_power: f64) -> Result<f64> {
    h.check(w)?;
    check_noise(noise_power)?;
    let q = h.received(w, k, p);
    Ok(whitened(&covariance(&q, None, noise_power), &q[k]).0)
}

/// Lagrangian dual surrogate of the weighted sum-rate, in bits:
/// `Σ η_k [ln(1+ρ) − ρ + (1+ρ) f_{k,p}] / ln 2`.
///
/// Maximized over `ρ` exactly at `ρ = γ`, where it equals the WSR. Evaluated
/// as `ln(1+ρ) + (γ − ρ)/(1+γ)` with `f = γ/(1+γ)`, which avoids the
/// cancellation between `ρ` and `(1+ρ) f` at high SINR.
pub fn lagrangian_objective(
    h: &EffectiveChannel,
    w: &Precoder,
    rho: &[f64],
    weights: &[f64],
    noise_power: f64,
) -> Result<f64> {
    let d = *h.dims();
    let gamma = crate::metrics::sinr_all(h, w, noise_power)?;
    let mut total = 0.0;
    for k in 0..d.num_users {
        for p in 0..d.num_subcarriers {
            let i = d.kp(k, p);
            let (r, g) = (rho[i], gamma[i]);
            total += weights[k] * (r.ln_1p() + (g - r) / (1.0 + g));
        }
    }
    Ok(total / LN_2)
}

/// `g1(W) = Σ μ_{k,p} f_{k,p}`: the precoder subproblem objective.
pub fn weighted_fraction_sum(h: &EffectiveChannel, w: &Precoder, mu: &[f64], noise_power: f64) -> Result<f64> {
    let d = *h.dims();
    let mut total = 0.0;
    for k in 0..d.num_users {
        for p in 0..d.num_subcarriers {
            total += mu[d.kp(k, p)] * f_kp(h, w, k, p, noise_power)?;
        }
    }
    Ok(total)
}

/// `g4(θ) = Σ μ_{k,p} f_{k,p}(θ)`: the reflection subproblem objective.
pub fn weighted_fraction_sum_at(
    channels: &ChannelSet,
    phases: &PhaseConfig,
    w: &Precoder,
    mu: &[f64],
    noise_power: f64,
) -> Result<f64> {
    weighted_fraction_sum(&effective_channel(channels, phases)?, w, mu, noise_power)
}

/// Optimal quadratic-transform vector for one `(k, p)` given the received
/// streams `q_j`: `√μ (Σ_j q_j q_jᴴ + σ² I)⁻¹ q_k`.
fn transform_vector(q: &[CVector], k: usize, mu: f64, noise_power: f64) -> CVector {
    whitened(&covariance(q, None, noise_power), &q[k]).1 * C64::from(mu.sqrt())
}

/// Quadratic-transform objective for one `(k, p)`:
/// `2√μ Re{aᴴ q_k} − aᴴ (Σ_j q_j q_jᴴ + σ² I) a`.
fn transform_term(q: &[CVector], k: usize, aux: &CVector, mu: f64, noise_power: f64) -> f64 {
    let linear = 2.0 * mu.sqrt() * aux.dotc(&q[k]).re;
    let quad: f64 = q.iter().map(|qj| aux.dotc(qj).norm_sqr()).sum::<f64>() + noise_power * aux.norm_squared();
    linear - quad
}

/// `ξ_{k,p} = √μ_{k,p} (Σ_j h_{k,p}ᴴ w_{p,j} (h_{k,p}ᴴ w_{p,j})ᴴ + σ² I)⁻¹ h_{k,p}ᴴ w_{p,k}`.
pub fn update_xi(h: &EffectiveChannel, w: &Precoder, mu: &[f64], noise_power: f64) -> Result<Vec<CVector>> {
    h.check(w)?;
    check_noise(noise_power)?;
    let d = *h.dims();
    let mut xi = Vec::with_capacity(d.num_users * d.num_subcarriers);
    for k in 0..d.num_users {
        for p in 0..d.num_subcarriers {
            let q = h.received(w, k, p);
            xi.push(transform_vector(&q, k, mu[d.kp(k, p)], noise_power));
        }
    }
    Ok(xi)
}

/// `g2(W, ξ)`.
pub fn active_transform_objective(
    h: &EffectiveChannel,
    w: &Precoder,
    xi: &[CVector],
    mu: &[f64],
    noise_power: f64,
) -> Result<f64> {
    h.check(w)?;
    let d = *h.dims();
    let mut total = 0.0;
    for k in 0..d.num_users {
        for p in 0..d.num_subcarriers {
            let i = d.kp(k, p);
            total += transform_term(&h.received(w, k, p), k, &xi[i], mu[i], noise_power);
        }
    }
    Ok(total)
}

/// Concave quadratic `g3(W) = −Σ_{p,k} w_{p,k}ᴴ a_p w_{p,k} + 2 Re{Σ v_{p,k}ᴴ w_{p,k}} − Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveQuadratic {
    /// `a_p`, one (B·M)×(B·M) Hermitian PSD block per subcarrier.
    pub a: Vec<CMatrix>,
    /// Linear coefficients `v_{p,k}`, shaped like the precoder.
    pub v: Precoder,
    pub y: f64,
    /// `μ_{k,p}` used to build the quadratic, indexed by `dims.kp(k, p)`.
    pub mu: Vec<f64>,
}

impl ActiveQuadratic {
    pub fn objective(&self, w: &Precoder) -> f64 {
        let mut total = -self.y;
        for p in 0..w.num_subcarriers() {
            let a = &self.a[p];
            for k in 0..w.num_users() {
                let x = w.get(p, k);
                total += 2.0 * self.v.get(p, k).dotc(x).re - x.dotc(&(a * x)).re;
            }
        }
        total
    }

    /// The same quadratic minus the proximal term `Σ_p δ_p ‖W_p − anchor_p‖²`,
    /// with `δ_p = weight · tr(a_p)`.
    ///
    /// Every block becomes definite, so the maximizer is unique even when
    /// `a_p` is rank deficient, while `anchor` keeps its objective value.
    pub fn with_proximal(&self, anchor: &Precoder, weight: f64) -> ActiveQuadratic {
        let mut out = self.clone();
        for (p, a) in out.a.iter_mut().enumerate() {
            let delta = weight * a.trace().re.max(0.0);
            for i in 0..a.nrows() {
                a[(i, i)] += C64::from(delta);
            }
            for k in 0..anchor.num_users() {
                let x = anchor.get(p, k);
                *out.v.get_mut(p, k) += x * C64::from(delta);
                out.y += delta * x.norm_squared();
            }
        }
        out
    }
}

/// Builds `a_p = Σ_k h_{k,p} ξ ξᴴ h_{k,p}ᴴ`, `v_{p,k} = √μ h_{k,p} ξ_{k,p}`
/// and `Y = σ² Σ ‖ξ_{k,p}‖²`, so that `g3(W) = g2(W, ξ)` for every `W`.
pub fn build_active_quadratic(h: &EffectiveChannel, xi: &[CVector], mu: &[f64], noise_power: f64) -> ActiveQuadratic {
    let d = *h.dims();
    let n = d.stacked_tx();
    let mut a = vec![CMatrix::zeros(n, n); d.num_subcarriers];
    let mut v = Precoder::zeros(&d);
    let mut y = 0.0;
    for k in 0..d.num_users {
        for p in 0..d.num_subcarriers {
            let i = d.kp(k, p);
            let hx = h.get(k, p) * &xi[i];
            a[p].gerc(C64::from(1.0), &hx, &hx, C64::from(1.0));
            *v.get_mut(p, k) = &hx * C64::from(mu[i].sqrt());
            y += noise_power * xi[i].norm_squared();
        }
    }
    ActiveQuadratic { a, v, y, mu: mu.to_vec() }
}

/// `Q_{k,p,j}(θ) = Σ_b (H_{b,k,p}ᴴ + F_{k,p}ᴴ Θᴴ G_{b,p}) w_{b,p,j}`.
///
/// Evaluated through `G_p w` rather than through the equivalent channel.
pub fn q_func(channels: &ChannelSet, phases: &PhaseConfig, w: &Precoder, k: usize, p: usize, j: usize) -> CVector {
    let wj = w.get(p, j);
    let mut out = channels.stacked_direct(k, p).ad_mul(wj);
    if channels.dims().num_ris > 0 {
        let x = channels.stacked_bs_ris(p) * wj;
        let scaled = x.zip_map(&phases.theta, |xi, t| t.conj() * xi);
        out += channels.stacked_ris_user(k, p).ad_mul(&scaled);
    }
    out
}

fn q_all(channels: &ChannelSet, phases: &PhaseConfig, w: &Precoder, k: usize, p: usize) -> Vec<CVector> {
    (0..channels.dims().num_users).map(|j| q_func(channels, phases, w, k, p, j)).collect()
}

fn check_passive_inputs(channels: &ChannelSet, phases: &PhaseConfig, noise_power: f64) -> Result<()> {
    check_noise(noise_power)?;
    if phases.theta.len() != channels.dims().stacked_ris() {
        return Err(Error::Contract("θ length does not match the channel".into()));
    }
    Ok(())
}

/// `ϖ_{k,p} = √μ_{k,p} (Σ_j Q_{k,p,j} Q_{k,p,j}ᴴ + σ² I)⁻¹ Q_{k,p,k}`.
pub fn update_varpi(
    channels: &ChannelSet,
    phases: &PhaseConfig,
    w: &Precoder,
    mu: &[f64],
    noise_power: f64,
) -> Result<Vec<CVector>> {
    check_passive_inputs(channels, phases, noise_power)?;
    let d = *channels.dims();
    let mut varpi = Vec::with_capacity(d.num_users * d.num_subcarriers);
    for k in 0..d.num_users {
        for p in 0..d.num_subcarriers {
            let q = q_all(channels, phases, w, k, p);
            varpi.push(transform_vector(&q, k, mu[d.kp(k, p)], noise_power));
        }
    }
    Ok(varpi)
}

/// `g5(θ, ϖ) = Σ_{k,p} 2√μ Re{ϖᴴ Q_{k,p,k}} − ϖᴴ (Σ_j Q_{k,p,j} Q_{k,p,j}ᴴ + σ² I) ϖ`.
pub fn passive_transform_objective(
    channels: &ChannelSet,
    phases: &PhaseConfig,
    w: &Precoder,
    varpi: &[CVector],
    mu: &[f64],
    noise_power: f64,
) -> Result<f64> {
    check_passive_inputs(channels, phases, noise_power)?;
    let d = *channels.dims();
    let mut total = 0.0;
    for k in 0..d.num_users {
        for p in 0..d.num_subcarriers {
            let i = d.kp(k, p);
            total += transform_term(&q_all(channels, phases, w, k, p), k, &varpi[i], mu[i], noise_power);
        }
    }
    Ok(total)
}

/// Concave quadratic `g6(θ) = −θᴴ Λ θ + 2 Re{θᴴ ν} − ζ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PassiveQuadratic {
    pub lambda: CMatrix,
    pub nu: CVector,
    pub zeta: f64,
    /// `c_{k,p,j} = ϖ_{k,p}ᴴ Σ_b H_{b,k,p}ᴴ w_{b,p,j}` at `(dims.kp(k,p))·K + j`.
    pub c: Vec<C64>,
    /// `g_{k,p,j} = diag(ϖ_{k,p}ᴴ F_{k,p}ᴴ) G_p w_{p,j}`, same indexing as `c`.
    pub g: Vec<CVector>,
}

impl PassiveQuadratic {
    pub fn objective(&self, theta: &CVector) -> f64 {
        2.0 * theta.dotc(&self.nu).re - theta.dotc(&(&self.lambda * theta)).re - self.zeta
    }

    pub fn dim(&self) -> usize {
        self.nu.len()
    }
}

/// Builds `Λ`, `ν`, `ζ` so that `g6(θ) = g5(θ, ϖ)` for every `θ`.
pub fn build_passive_quadratic(
    channels: &ChannelSet,
    w: &Precoder,
    varpi: &[CVector],
    mu: &[f64],
    noise_power: f64,
) -> PassiveQuadratic {
    let d = *channels.dims();
    let n = d.stacked_ris();
    let users = d.num_users;
    // G_p w_{p,j}
    let cascaded: Vec<CVector> = (0..d.num_subcarriers)
        .flat_map(|p| (0..users).map(move |j| (p, j)))
        .map(|(p, j)| channels.stacked_bs_ris(p) * w.get(p, j))
        .collect();

    let mut lambda = CMatrix::zeros(n, n);
    let mut nu = CVector::zeros(n);
    let mut zeta = 0.0;
    let mut c = Vec::with_capacity(users * users * d.num_subcarriers);
    let mut g = Vec::with_capacity(users * users * d.num_subcarriers);
    for k in 0..users {
        for p in 0..d.num_subcarriers {
            let i = d.kp(k, p);
            let vp = &varpi[i];
            let sqrt_mu = mu[i].sqrt();
            let direct = channels.stacked_direct(k, p) * vp;
            let reflected = (channels.stacked_ris_user(k, p) * vp).map(|x| x.conj());
            zeta += noise_power * vp.norm_squared();
            for j in 0..users {
                let cj = direct.dotc(w.get(p, j));
                let gj = reflected.component_mul(&cascaded[p * users + j]);
                lambda.gerc(C64::from(1.0), &gj, &gj, C64::from(1.0));
                nu -= &gj * cj.conj();
                zeta += cj.norm_sqr();
                if j == k {
                    nu += &gj * C64::from(sqrt_mu);
                    zeta -= 2.0 * sqrt_mu * cj.re;
                }
                c.push(cj);
                g.push(gj);
            }
        }
    }
    PassiveQuadratic { lambda, nu, zeta, c, g }
}
