//! Equivalent channel, SINR, weighted sum-rate and per-BS power.

use crate::channel::{ChannelSet, Dimensions};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_solve, CMatrix, CVector, C64};

/// Feasible set for the RIS reflection coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseMode {
    /// `|θ_n| ≤ 1`
    Relaxed,
    /// `|θ_n| = 1`
    UnitModulus,
}

/// Stacked reflection vector `θ = [θ_{1,1}, …, θ_{R,N}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    pub theta: CVector,
    pub mode: PhaseMode,
}

impl PhaseConfig {
    pub fn zeros(len: usize, mode: PhaseMode) -> Self {
        PhaseConfig { theta: CVector::zeros(len), mode }
    }

    /// Largest violation of the mode's constraint over all entries.
    pub fn violation(&self) -> f64 {
        self.theta
            .iter()
            .map(|t| match self.mode {
                PhaseMode::Relaxed => (t.norm() - 1.0).max(0.0),
                PhaseMode::UnitModulus => (t.norm() - 1.0).abs(),
            })
            .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.violation() <= tol
    }
}

/// Active precoders `w_{p,k}`, each of length `B·M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    num_bs: usize,
    bs_antennas: usize,
    num_users: usize,
    num_subcarriers: usize,
    w: Vec<CVector>,
}

impl Precoder {
    pub fn zeros(dims: &Dimensions) -> Self {
        Precoder {
            num_bs: dims.num_bs,
            bs_antennas: dims.bs_antennas,
            num_users: dims.num_users,
            num_subcarriers: dims.num_subcarriers,
            w: vec![CVector::zeros(dims.stacked_tx()); dims.num_users * dims.num_subcarriers],
        }
    }

    /// Builds a precoder from `f(p, k)`; every vector must have length `B·M`.
    pub fn from_fn(dims: &Dimensions, mut f: impl FnMut(usize, usize) -> CVector) -> Result<Self> {
        let mut out = Self::zeros(dims);
        for p in 0..dims.num_subcarriers {
            for k in 0..dims.num_users {
                let v = f(p, k);
                if v.len() != dims.stacked_tx() {
                    return Err(Error::Contract(format!(
                        "precoder ({p},{k}) has length {}, expected {}",
                        v.len(),
                        dims.stacked_tx()
                    )));
                }
                *out.get_mut(p, k) = v;
            }
        }
        Ok(out)
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn bs_antennas(&self) -> usize {
        self.bs_antennas
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn get(&self, p: usize, k: usize) -> &CVector {
        &self.w[p * self.num_users + k]
    }

    pub fn get_mut(&mut self, p: usize, k: usize) -> &mut CVector {
        &mut self.w[p * self.num_users + k]
    }

    /// All vectors in `(p, k)` order with `k` fastest, as in the stacked `W`.
    pub fn iter(&self) -> impl Iterator<Item = &CVector> {
        self.w.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut CVector> {
        self.w.iter_mut()
    }

    /// Multiplies every antenna of BS `b` by `factor`.
    pub fn scale_bs(&mut self, b: usize, factor: f64) {
        let m = self.bs_antennas;
        for w in &mut self.w {
            for x in w.rows_mut(b * m, m).iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().flat_map(|w| w.iter()).all(|x| x.re.is_finite() && x.im.is_finite())
    }

    fn matches(&self, dims: &Dimensions) -> bool {
        self.num_bs == dims.num_bs
            && self.bs_antennas == dims.bs_antennas
            && self.num_users == dims.num_users
            && self.num_subcarriers == dims.num_subcarriers
    }
}

/// Stacked equivalent channels `h_{k,p}` ((B·M)×U) for a fixed `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    dims: Dimensions,
    h: Vec<CMatrix>,
}

impl EffectiveChannel {
    pub fn dims(&self) -> &Dimensions {
        &self.dims
    }

    pub fn get(&self, k: usize, p: usize) -> &CMatrix {
        &self.h[self.dims.kp(k, p)]
    }

    /// `h_{k,p}ᴴ w_{p,j}` for every `j`.
    pub fn received(&self, w: &Precoder, k: usize, p: usize) -> Vec<CVector> {
        let h = self.get(k, p);
        (0..self.dims.num_users).map(|j| h.ad_mul(w.get(p, j))).collect()
    }

    pub(crate) fn check(&self, w: &Precoder) -> Result<()> {
        if !w.matches(&self.dims) {
            return Err(Error::Contract("precoder dimensions do not match the channel".into()));
        }
        Ok(())
    }
}

/// `h_{k,p} = D_{k,p} + G_pᴴ Θ F_{k,p}`, i.e. the conjugate transpose of
/// `[H_{1,k,p}ᴴ … H_{B,k,p}ᴴ] + F_{k,p}ᴴ Θᴴ G_p`.
pub fn effective_channel(channels: &ChannelSet, phases: &PhaseConfig) -> Result<EffectiveChannel> {
    let dims = *channels.dims();
    if phases.theta.len() != dims.stacked_ris() {
        return Err(Error::Contract(format!("θ has length {}, expected {}", phases.theta.len(), dims.stacked_ris())));
    }
    let mut h = Vec::with_capacity(dims.num_users * dims.num_subcarriers);
    for k in 0..dims.num_users {
        for p in 0..dims.num_subcarriers {
            let mut hk = channels.stacked_direct(k, p).clone();
            if dims.num_ris > 0 {
                let mut reflected = channels.stacked_ris_user(k, p).clone();
                for (mut row, t) in reflected.row_iter_mut().zip(phases.theta.iter()) {
                    row *= *t;
                }
                hk += channels.stacked_bs_ris(p).ad_mul(&reflected);
            }
            h.push(hk);
        }
    }
    Ok(EffectiveChannel { dims, h })
}

/// `Σ_j q_j q_jᴴ + σ² I`, skipping index `skip` when given.
pub(crate) fn covariance(streams: &[CVector], skip: Option<usize>, noise_power: f64) -> CMatrix {
    let u = streams.first().map_or(0, |q| q.len());
    let mut cov = CMatrix::identity(u, u) * C64::from(noise_power);
    for (j, q) in streams.iter().enumerate() {
        if Some(j) != skip {
            cov.gerc(C64::from(1.0), q, q, C64::from(1.0));
        }
    }
    cov
}

/// `qᴴ C⁻¹ q` and `C⁻¹ q` for Hermitian positive-definite `C`.
pub(crate) fn whitened(cov: &CMatrix, q: &CVector) -> (f64, CVector) {
    let x = hermitian_solve(cov, q).expect("noise term keeps the covariance positive definite");
    (q.dotc(&x).re.max(0.0), x)
}

pub(crate) fn check_noise(noise_power: f64) -> Result<()> {
    if !(noise_power > 0.0) {
        return Err(Error::Contract(format!("noise power must be positive, got {noise_power}")));
    }
    Ok(())
}

/// SINR `γ_{k,p}` with MMSE-style treatment of the `U` receive antennas.
pub fn sinr(h: &EffectiveChannel, w: &Precoder, k: usize, p: usize, noise_power: f64) -> Result<f64> {
    h.check(w)?;
    check_noise(noise_power)?;
    let q = h.received(w, k, p);
    Ok(whitened(&covariance(&q, Some(k), noise_power), &q[k]).0)
}

/// SINR for every `(k, p)`, stored at `dims.kp(k, p)`.
pub fn sinr_all(h: &EffectiveChannel, w: &Precoder, noise_power: f64) -> Result<Vec<f64>> {
    let d = *h.dims();
    let mut out = vec![0.0; d.num_users * d.num_subcarriers];
    for k in 0..d.num_users {
        for p in 0..d.num_subcarriers {
            out[d.kp(k, p)] = sinr(h, w, k, p, noise_power)?;
        }
    }
    Ok(out)
}

/// Weighted sum-rate `Σ_k Σ_p η_k log2(1 + γ_{k,p})`, bit/s/Hz.
pub fn wsr(h: &EffectiveChannel, w: &Precoder, noise_power: f64, weights: &[f64]) -> Result<f64> {
    let d = *h.dims();
    if weights.len() != d.num_users {
        return Err(Error::Contract(format!("expected {} weights, got {}", d.num_users, weights.len())));
    }
    let gammas = sinr_all(h, w, noise_power)?;
    let mut total = 0.0;
    for (k, eta) in weights.iter().enumerate() {
        for p in 0..d.num_subcarriers {
            total += eta * (1.0 + gammas[d.kp(k, p)]).log2();
        }
    }
    Ok(total)
}

/// Transmit power of each BS summed over subcarriers and users.
pub fn per_bs_power(w: &Precoder) -> Vec<f64> {
    let m = w.bs_antennas;
    (0..w.num_bs).map(|b| w.iter().map(|v| v.rows(b * m, m).norm_squared()).sum()).collect()
}

/// Convenience: WSR straight from channels and phases.
pub fn wsr_at(
    channels: &ChannelSet,
    phases: &PhaseConfig,
    w: &Precoder,
    noise_power: f64,
    weights: &[f64],
) -> Result<f64> {
    wsr(&effective_channel(channels, phases)?, w, noise_power, weights)
}
