use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::fp::ActiveQuadratic;
use crate::linalg::{check_psd, conditioned_cholesky, min_norm_solve, CMatrix, CVector, C64};
use crate::metrics::{per_bs_power, Precoder};

use super::{SolverOptions, PSD_TOLERANCE};

const NEWTON_BACKTRACKS: usize = 40;
const MAX_NEWTON_STEPS: usize = 50;
/// Newton keeps positive duals positive, shrinking each by at most this
/// factor per step; zero duals are left to the bisection sweep, since the
/// stationary point can jump at `λ_b = 0` when `a_p` is singular.
const NEWTON_MIN_SHRINK: f64 = 1e-3;
/// Smallest dual the bisection resolves, relative to its initial bracket.
const DUAL_FLOOR: f64 = 1e-30;
/// Relative diagonal shift of the dual Hessian.
const HESSIAN_SHIFT: f64 = 1e-10;
const ARMIJO: f64 = 1e-4;
/// Relative rounding level of the dual value.
const GAP_NOISE: f64 = 64.0 * f64::EPSILON;
/// Largest relative budget overshoot fixed by rescaling instead of more sweeps.
const MAX_RESCALE: f64 = 1e-6;
/// Relative singular-value cutoff for the stationarity systems.
const SINGULAR_RCOND: f64 = 1e-12;
/// Relative residual above which `v` is deemed outside the range of `a`.
const INCONSISTENT_RTOL: f64 = 1e-8;
/// Tikhonov weights, relative to `tr(a_p)`, tried when the exact problem stalls.
const FALLBACK_REGULARIZATION: [f64; 2] = [1e-12, 1e-10];

/// Output of [`solve_active`].
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSolution {
    pub precoder: Precoder,
    /// Per-BS dual variables `λ_b ≥ 0`.
    pub duals: Vec<f64>,
    /// Full cyclic sweeps over the duals.
    pub sweeps: usize,
    pub kkt_residual: f64,
}

/// Stationary point of the Lagrangian for fixed duals.
struct Stationary {
    w: Precoder,
    power: Vec<f64>,
}

/// Hermitian part of `a_p + Σ λ_b E_b`. Rounding leaves small imaginary
/// parts on the diagonal of `a_p`, which would make the Cholesky pivots
/// complex.
fn shifted(a: &CMatrix, duals: &[f64], m: usize) -> CMatrix {
    let mut sys = hermitian_part(a);
    for (b, lam) in duals.iter().enumerate() {
        for i in b * m..(b + 1) * m {
            sys[(i, i)] += C64::from(*lam);
        }
    }
    sys
}

/// Cholesky factor of `a_p + Σ λ_b E_b`. With every dual positive the shift
/// makes the system definite and any real positive factorization is
/// accepted; otherwise a nearly singular `a_p` is left to the min-norm path.
fn factor(a: &CMatrix, duals: &[f64], m: usize) -> Option<Cholesky<C64, Dyn>> {
    let rcond = if duals.iter().all(|l| *l > 0.0) { 0.0 } else { SINGULAR_RCOND };
    conditioned_cholesky(&shifted(a, duals, m), rcond)
}

/// Solves `(a_p + Σ_b λ_b E_b) w_{p,k} = v_{p,k}` for all `(p, k)`.
///
/// When the system is not numerically definite the minimum-norm solution is
/// used, with singular values below `SINGULAR_RCOND · σ_max` dropped so that
/// rounding-level components of `v` outside the range of `a_p` are not
/// amplified. BSs whose block of the residual stays nonzero (the right-hand
/// side has a genuine component in the null space there) report infinite
/// power, meaning their dual must be strictly positive.
fn stationary_point(quad: &ActiveQuadratic, duals: &[f64]) -> Stationary {
    let m = quad.v.bs_antennas();
    let mut w = quad.v.clone();
    let mut unbounded = vec![false; duals.len()];
    for (p, a) in quad.a.iter().enumerate() {
        let chol = factor(a, duals, m);
        for k in 0..quad.v.num_users() {
            let rhs = quad.v.get(p, k);
            let x = match &chol {
                Some(c) => c.solve(rhs),
                None => {
                    let sys = shifted(a, duals, m);
                    let x = min_norm_solve(&sys, rhs, SINGULAR_RCOND);
                    let r = &sys * &x - rhs;
                    let tol = INCONSISTENT_RTOL * rhs.norm().max(f64::MIN_POSITIVE);
                    for (b, flag) in unbounded.iter_mut().enumerate() {
                        if r.rows(b * m, m).norm() > tol {
                            *flag = true;
                        }
                    }
                    x
                }
            };
            *w.get_mut(p, k) = x;
        }
    }
    let mut power = per_bs_power(&w);
    for (p, flag) in power.iter_mut().zip(&unbounded) {
        if *flag {
            *p = f64::INFINITY;
        }
    }
    Stationary { w, power }
}

struct KktParts {
    /// `‖(A + Σλ_b D_b) W − V‖`.
    stationarity: f64,
    /// `max_b (power_b − P_b)⁺ / P_b`.
    excess: f64,
    /// `max_b λ_b |P_b − power_b|`.
    slackness: f64,
    negative_dual: f64,
}

fn kkt_parts(w: &Precoder, quad: &ActiveQuadratic, max_power: &[f64], duals: &[f64]) -> KktParts {
    let m = w.bs_antennas();
    let mut stationarity = 0.0;
    for (p, a) in quad.a.iter().enumerate() {
        for k in 0..w.num_users() {
            let x = w.get(p, k);
            let mut r = a * x - quad.v.get(p, k);
            for (b, lam) in duals.iter().enumerate() {
                for i in b * m..(b + 1) * m {
                    r[i] += x[i] * *lam;
                }
            }
            stationarity += r.norm_squared();
        }
    }
    let mut parts = KktParts { stationarity: stationarity.sqrt(), excess: 0.0, slackness: 0.0, negative_dual: 0.0 };
    for ((pw, cap), lam) in per_bs_power(w).iter().zip(max_power).zip(duals) {
        parts.excess = parts.excess.max((pw - cap).max(0.0) / cap);
        parts.slackness = parts.slackness.max(lam.max(0.0) * (cap - pw).abs());
        parts.negative_dual = parts.negative_dual.max((-lam).max(0.0));
    }
    parts
}

/// Combined KKT violation for the active problem at `(W, λ)`:
/// the maximum of the stationarity norm `‖(A + Σλ_b D_b) W − V‖`, the relative
/// budget excess `max_b (power_b − P_b)⁺ / P_b`, the complementary
/// slackness `max_b λ_b |P_b − power_b|` and any negative dual.
pub fn kkt_residual_active(w: &Precoder, quad: &ActiveQuadratic, max_power: &[f64], duals: &[f64]) -> f64 {
    let k = kkt_parts(w, quad, max_power, duals);
    k.stationarity.max(k.excess).max(k.slackness).max(k.negative_dual)
}

/// Budget overshoot left for the final rescaling step, relative to the budget.
fn excess_beyond_rescale(k: &KktParts) -> f64 {
    if k.excess > MAX_RESCALE {
        k.excess
    } else {
        0.0
    }
}

/// Objective cost of scaling each over-budget BS back onto its budget:
/// `Σ_b λ_b e_b + c e_b² / (4 power_b)` with `e_b = (power_b − P_b)⁺` and
/// `c ≥ ‖a_p‖` for every subcarrier.
fn rescale_cost(at: &Stationary, max_power: &[f64], duals: &[f64], curvature: f64) -> f64 {
    at.power
        .iter()
        .zip(max_power)
        .zip(duals)
        .map(|((pw, cap), lam)| {
            let e = (pw - cap).max(0.0);
            if e > 0.0 {
                lam * e + curvature * e * e / (4.0 * pw)
            } else {
                0.0
            }
        })
        .sum()
}

/// Stopping rule, evaluated at the exact stationary point of the current
/// duals: stationarity relative to `‖V‖`, and in objective units the
/// complementary slackness (which bounds the duality gap) plus the cost of
/// rescaling any small budget overshoot. The objective terms are not
/// required to go below the rounding level of the dual value `d`.
fn scaled_residual(at: &Stationary, quad: &ActiveQuadratic, max_power: &[f64], duals: &[f64], scale: &Scale) -> f64 {
    let k = kkt_parts(&at.w, quad, max_power, duals);
    let d = dual_value(quad, max_power, duals, at);
    let gap_scale = if d.is_finite() { (GAP_NOISE * d.abs() / scale.tol).max(1.0) } else { 1.0 };
    let gap = k.slackness + rescale_cost(at, max_power, duals, scale.curvature);
    (k.stationarity / scale.v_norm).max(gap / gap_scale).max(excess_beyond_rescale(&k))
}

/// Stationarity relative to `‖V‖` and any overshoot too large to rescale.
fn primal_residual(at: &Stationary, quad: &ActiveQuadratic, max_power: &[f64], duals: &[f64], scale: &Scale) -> f64 {
    let k = kkt_parts(&at.w, quad, max_power, duals);
    (k.stationarity / scale.v_norm).max(excess_beyond_rescale(&k))
}

struct Scale {
    v_norm: f64,
    curvature: f64,
    tol: f64,
}

/// Dual function `Σ_{p,k} Re vᴴ w + Σ_b λ_b P_b` at the stationary point,
/// up to the constant of `g3`. Convex in the duals; its gradient is
/// `P_b − power_b`.
fn dual_value(quad: &ActiveQuadratic, max_power: &[f64], duals: &[f64], at: &Stationary) -> f64 {
    if at.power.iter().any(|p| !p.is_finite()) {
        return f64::INFINITY;
    }
    let linear: f64 = quad.v.iter().zip(at.w.iter()).map(|(v, w)| v.dotc(w).re).sum();
    linear + duals.iter().zip(max_power).map(|(l, p)| l * p).sum::<f64>()
}

/// Regularized Newton direction for the dual function over the BSs with
/// `λ_b > 0`. The Hessian is `2 Re Σ_{p,k} (E_b w)ᴴ S_p⁻¹ (E_c w)` with
/// `S_p = a_p + Σ λ E`; it is singular when the duals are only determined up
/// to a ridge, hence the small diagonal shift. Returns `None` when a system
/// is not definite.
fn newton_direction(quad: &ActiveQuadratic, max_power: &[f64], duals: &[f64], at: &Stationary) -> Option<Vec<f64>> {
    let m = quad.v.bs_antennas();
    let active: Vec<usize> = (0..duals.len()).filter(|&b| duals[b] > 0.0).collect();
    if active.is_empty() {
        return None;
    }
    let n = active.len();
    let mut hess = DMatrix::<f64>::zeros(n, n);
    for (p, a) in quad.a.iter().enumerate() {
        let chol = factor(a, duals, m)?;
        for k in 0..quad.v.num_users() {
            let w = at.w.get(p, k);
            let blocks: Vec<CVector> = active
                .iter()
                .map(|&b| {
                    let mut e = CVector::zeros(w.len());
                    e.rows_mut(b * m, m).copy_from(&w.rows(b * m, m));
                    e
                })
                .collect();
            for (j, e) in blocks.iter().enumerate() {
                let z = chol.solve(e);
                for (i, f) in blocks.iter().enumerate() {
                    hess[(i, j)] += 2.0 * f.dotc(&z).re;
                }
            }
        }
    }
    let shift = HESSIAN_SHIFT * (hess.trace() / n as f64).max(f64::MIN_POSITIVE);
    for i in 0..n {
        hess[(i, i)] += shift;
    }
    let rhs = DVector::from_iterator(n, active.iter().map(|&b| at.power[b] - max_power[b]));
    let step = hess.cholesky()?.solve(&rhs);
    let mut dir = vec![0.0; duals.len()];
    for (i, &b) in active.iter().enumerate() {
        dir[b] = step[i];
    }
    dir.iter().all(|x| x.is_finite()).then_some(dir)
}

fn validate(quad: &ActiveQuadratic, max_power: &[f64]) -> Result<()> {
    let v = &quad.v;
    if max_power.len() != v.num_bs() {
        return Err(Error::Contract(format!("expected {} power budgets, got {}", v.num_bs(), max_power.len())));
    }
    if !max_power.iter().all(|p| *p > 0.0 && p.is_finite()) {
        return Err(Error::Contract("power budgets must be positive".into()));
    }
    let n = v.num_bs() * v.bs_antennas();
    if quad.a.len() != v.num_subcarriers() || quad.a.iter().any(|a| a.shape() != (n, n)) {
        return Err(Error::Contract("quadratic blocks do not match the precoder shape".into()));
    }
    for (p, a) in quad.a.iter().enumerate() {
        check_psd(&hermitian_part(a), PSD_TOLERANCE, &format!("a_{p}")).map_err(Error::Contract)?;
    }
    Ok(())
}

fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::from(0.5)
}

/// Maximizes `g3(W)` subject to `Σ_{p,k} ‖w_{b,p,k}‖² ≤ P_b` for every BS.
///
/// The per-BS duals are updated one at a time: for BS `b`, `λ_b = 0` is kept
/// when the resulting power fits the budget; otherwise `λ_b` is bisected
/// until the budget holds with equality (the power of BS `b` is
/// nonincreasing in its own dual). Sweeps repeat until the scale-free KKT
/// residual (see `scaled_residual`) drops below `opts.kkt_tolerance`. After each
/// sweep, safeguarded Newton steps on the positive duals minimize the convex
/// dual function, with an Armijo backtracking search. `warm_duals` seeds the duals, typically
/// from the previous outer iteration.
///
/// When `a_p` is singular the dual function has kinks and the sweeps can
/// stall. The problem is then solved again with a Tikhonov term
/// `δ_p ‖W_p‖²`, `δ_p = 1e-12 · tr(a_p)` and then `1e-10 · tr(a_p)`, which
/// costs at most `δ ΣP_b` in objective.
///
/// The reported [`ActiveSolution::kkt_residual`] is the unscaled
/// [`kkt_residual_active`] of the original problem.
pub fn solve_active(
    quad: &ActiveQuadratic,
    max_power: &[f64],
    warm_duals: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<ActiveSolution> {
    opts.validate()?;
    validate(quad, max_power)?;
    let mut outcome = solve_dual(quad, max_power, warm_duals, opts);
    let mut sweeps = opts.max_iterations;
    for weight in FALLBACK_REGULARIZATION {
        if !matches!(outcome, Err(Error::ActiveNotConverged { .. })) {
            break;
        }
        let mut origin = quad.v.clone();
        origin.iter_mut().for_each(|x| x.fill(C64::from(0.0)));
        outcome = solve_dual(&quad.with_proximal(&origin, weight), max_power, None, opts).map(|mut sol| {
            sol.kkt_residual = kkt_residual_active(&sol.precoder, quad, max_power, &sol.duals);
            sol.sweeps += sweeps;
            sol
        });
        sweeps += opts.max_iterations;
    }
    outcome
}

fn solve_dual(
    quad: &ActiveQuadratic,
    max_power: &[f64],
    warm_duals: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<ActiveSolution> {
    let num_bs = max_power.len();
    let m = quad.v.bs_antennas();
    let mut duals = match warm_duals {
        Some(d) if d.len() == num_bs => d.iter().map(|x| x.max(0.0)).collect(),
        _ => vec![0.0; num_bs],
    };
    let v_norm = quad.v.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt();
    let scale = Scale {
        v_norm: v_norm.max(f64::MIN_POSITIVE),
        curvature: quad.a.iter().map(|a| a.trace().re.max(0.0)).fold(0.0, f64::max),
        tol: opts.kkt_tolerance,
    };
    let tol = scale.tol;

    let mut current = stationary_point(quad, &duals);
    let mut residual = f64::INFINITY;
    for sweep in 1..=opts.max_iterations {
        let start = duals.clone();
        for b in 0..num_bs {
            let cap = max_power[b];
            let previous = duals[b];
            duals[b] = 0.0;
            let at_zero = stationary_point(quad, &duals);
            if at_zero.power[b] <= cap {
                current = at_zero;
                continue;
            }
            // Bracket: power_b(lo) > cap >= power_b(hi).
            let block_norm = quad.v.iter().map(|x| x.rows(b * m, m).norm_squared()).sum::<f64>().sqrt();
            let mut lo = 0.0;
            let mut hi = if previous > 0.0 { previous } else { (block_norm / cap.sqrt()).max(f64::MIN_POSITIVE) };
            let mut at_hi = loop {
                duals[b] = hi;
                let s = stationary_point(quad, &duals);
                if s.power[b] <= cap {
                    break s;
                }
                lo = hi;
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::ActiveNotConverged { iterations: sweep, residual, last: Box::new(current.w) });
                }
            };
            // With lo = 0 the power may stay below the cap all the way down
            // (the limit λ_b → 0⁺ differs from λ_b = 0 when a_p is singular),
            // so the bracket is not shrunk indefinitely.
            let floor = DUAL_FLOOR * hi;
            while at_hi.power[b] < cap * (1.0 - opts.dual_bisection_tolerance)
                && hi - lo > 1e-15 * hi
                && (lo > 0.0 || hi > floor)
            {
                let mid = 0.5 * (lo + hi);
                duals[b] = mid;
                let s = stationary_point(quad, &duals);
                if s.power[b] <= cap {
                    hi = mid;
                    at_hi = s;
                } else {
                    lo = mid;
                }
            }
            duals[b] = hi;
            current = at_hi;
        }
        residual = scaled_residual(&current, quad, max_power, &duals, &scale);
        // Coordinate bisection crawls when the BSs are strongly coupled;
        // polish with projected Newton steps on the dual function.
        let mut newton_steps = 0;
        'polish: while residual > tol && newton_steps < MAX_NEWTON_STEPS {
            newton_steps += 1;
            let Some(dir) = newton_direction(quad, max_power, &duals, &current) else { break };
            let value = dual_value(quad, max_power, &duals, &current);
            let mut t = 1.0;
            for _ in 0..NEWTON_BACKTRACKS {
                let trial: Vec<f64> =
                    duals.iter().zip(&dir).map(|(d, s)| (d + t * s).max(d * NEWTON_MIN_SHRINK)).collect();
                let s = stationary_point(quad, &trial);
                let r = scaled_residual(&s, quad, max_power, &trial, &scale);
                let decrease: f64 = trial
                    .iter()
                    .zip(&duals)
                    .enumerate()
                    .map(|(b, (new, old))| (max_power[b] - current.power[b]) * (new - old))
                    .sum();
                let trial_value = dual_value(quad, max_power, &trial, &s);
                if (decrease < 0.0 && trial_value <= value + ARMIJO * decrease) || r < residual {
                    let stalled = trial == duals;
                    duals = trial;
                    current = s;
                    residual = r;
                    if stalled {
                        break 'polish;
                    }
                    continue 'polish;
                }
                t *= 0.5;
            }
            break;
        }
        // A sweep that leaves the duals bitwise unchanged cannot lower the
        // gap any further; accept it when the primal conditions hold.
        let stalled = duals == start;
        if residual <= tol || (stalled && primal_residual(&current, quad, max_power, &duals, &scale) <= tol) {
            let mut w = current.w;
            // Other duals moved after BS b was bisected; absorb the tiny drift.
            for (b, (pw, cap)) in current.power.iter().zip(max_power).enumerate() {
                if pw > cap {
                    w.scale_bs(b, (cap / pw).sqrt());
                }
            }
            let kkt_residual = kkt_residual_active(&w, quad, max_power, &duals);
            return Ok(ActiveSolution { precoder: w, duals, sweeps: sweep, kkt_residual });
        }
    }
    Err(Error::ActiveNotConverged { iterations: opts.max_iterations, residual, last: Box::new(current.w) })
}
