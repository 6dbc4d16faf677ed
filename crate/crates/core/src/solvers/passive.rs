use crate::error::{Error, Result};
use crate::fp::PassiveQuadratic;
use crate::linalg::{check_psd, power_iteration, CVector, C64};
use crate::metrics::{PhaseConfig, PhaseMode};

use super::{SolverOptions, PSD_TOLERANCE};

const POWER_ITERATIONS: usize = 50;
const POWER_TOLERANCE: f64 = 1e-6;

/// Output of [`solve_passive`].
#[derive(Debug, Clone, PartialEq)]
pub struct PassiveSolution {
    pub phases: PhaseConfig,
    /// Accepted gradient steps.
    pub iterations: usize,
    /// Relative projected-gradient residual of the relaxed solution.
    pub residual: f64,
    /// Objective `g6` of the returned phases.
    pub objective: f64,
}

/// Clamps every entry into the closed unit disk, keeping its phase.
pub fn project_unit_disk(theta: &CVector) -> CVector {
    theta.map(|t| {
        let r = t.norm();
        if r > 1.0 {
            t / r
        } else {
            t
        }
    })
}

/// Maps every entry onto the unit circle; zero entries go to `1`.
pub fn project_unit_modulus(theta: &CVector) -> CVector {
    theta.map(|t| {
        let r = t.norm();
        if r > 0.0 {
            t / r
        } else {
            C64::new(1.0, 0.0)
        }
    })
}

/// Norm of the gradient mapping `L (θ − Π(θ + (ν − Λθ)/L))`, relative to
/// `max(‖ν‖, L)`. Zero exactly at the optimum of the relaxed problem.
pub fn projected_gradient_residual(quad: &PassiveQuadratic, theta: &CVector, lipschitz: f64) -> f64 {
    let grad = &quad.nu - &quad.lambda * theta;
    let (mapping, scale) = if lipschitz > 0.0 {
        let step = 1.0 / lipschitz;
        let moved = project_unit_disk(&(theta + &grad * C64::from(step)));
        ((theta - moved).norm() * lipschitz, quad.nu.norm().max(lipschitz))
    } else {
        // Linear objective: optimal iff every entry is phase-aligned with ν at full modulus.
        let target = theta.zip_map(&quad.nu, |t, n| if n.norm() > 0.0 { n / n.norm() } else { t });
        ((theta - target).norm() * quad.nu.norm(), quad.nu.norm())
    };
    if scale > 0.0 {
        mapping / scale
    } else {
        mapping
    }
}

/// Maximizes `g6(θ) = −θᴴΛθ + 2Re{θᴴν} − ζ` over the phase constraint set.
///
/// The relaxed problem (`|θ_n| ≤ 1`) is solved by projected gradient ascent
/// from `warm_start` with step `1/L`, `L` being the power-iteration estimate
/// of `λ_max(Λ)`, using Nesterov momentum. A step that lowers the objective
/// first drops the momentum; a plain step that still lowers it is retried
/// with the step multiplied by `opts.step_shrink`. Accepted iterates never
/// decrease `g6`. Iteration stops when
/// [`projected_gradient_residual`] falls below `opts.kkt_tolerance`.
///
/// In unit-modulus mode the relaxed optimum is projected onto the unit
/// circle. If the warm start is itself unit-modulus and scores higher than
/// the projection, it is returned instead, so the objective never decreases
/// relative to a feasible warm start.
pub fn solve_passive(
    quad: &PassiveQuadratic,
    mode: PhaseMode,
    warm_start: &PhaseConfig,
    opts: &SolverOptions,
) -> Result<PassiveSolution> {
    opts.validate()?;
    let n = quad.dim();
    if quad.lambda.shape() != (n, n) || warm_start.theta.len() != n {
        return Err(Error::Contract("passive quadratic and warm start disagree in size".into()));
    }
    check_psd(&quad.lambda, PSD_TOLERANCE, "Λ").map_err(Error::Contract)?;

    let (relaxed, iterations, residual) = relaxed_optimum(quad, &warm_start.theta, opts)?;
    let finish = |theta: CVector| {
        let objective = quad.objective(&theta);
        PassiveSolution { phases: PhaseConfig { theta, mode }, iterations, residual, objective }
    };
    match mode {
        PhaseMode::Relaxed => Ok(finish(relaxed)),
        PhaseMode::UnitModulus => {
            let projected = project_unit_modulus(&relaxed);
            let keep_warm = warm_start.mode == PhaseMode::UnitModulus
                && warm_start.is_feasible(1e-12)
                && quad.objective(&warm_start.theta) > quad.objective(&projected);
            Ok(finish(if keep_warm { warm_start.theta.clone() } else { projected }))
        }
    }
}

fn relaxed_optimum(quad: &PassiveQuadratic, warm: &CVector, opts: &SolverOptions) -> Result<(CVector, usize, f64)> {
    let nu_norm = quad.nu.norm();
    let lipschitz = power_iteration(&quad.lambda, POWER_ITERATIONS, POWER_TOLERANCE);
    let mut theta = project_unit_disk(warm);
    if lipschitz <= 1e-14 * nu_norm || lipschitz == 0.0 {
        // Λ ≈ 0: linear objective, maximized entrywise by full-modulus phase alignment.
        theta = theta.zip_map(&quad.nu, |t, nu| if nu.norm() > 0.0 { nu / nu.norm() } else { t });
        let residual = projected_gradient_residual(quad, &theta, 0.0);
        return Ok((theta, 0, residual));
    }

    // Small safety margin over the power-iteration estimate, which is a lower bound.
    let mut step = 1.0 / (1.01 * lipschitz);
    let mut objective = quad.objective(&theta);
    let scale = objective.abs().max(nu_norm).max(1.0);
    let mut residual = f64::INFINITY;
    let mut accepted = 0;
    // Nesterov extrapolation point and momentum counter; reset whenever the
    // extrapolated step would lower the objective.
    let mut y = theta.clone();
    let mut t = 1.0_f64;
    for _ in 0..opts.max_iterations {
        let grad = &quad.nu - &quad.lambda * &y;
        let candidate = project_unit_disk(&(&y + &grad * C64::from(step)));
        let value = quad.objective(&candidate);
        if value < objective - 1e-12 * scale {
            if t > 1.0 {
                y = theta.clone();
                t = 1.0;
            } else {
                step *= opts.step_shrink;
            }
            continue;
        }
        // Gradient restart: drop the momentum once the step and the
        // extrapolation point disagree in direction.
        let advance = &candidate - &theta;
        if (&y - &candidate).dotc(&advance).re > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = C64::from((t - 1.0) / t_next);
        y = &candidate + advance * momentum;
        t = t_next;
        theta = candidate;
        objective = value;
        accepted += 1;
        residual = projected_gradient_residual(quad, &theta, 1.0 / step);
        if residual <= opts.kkt_tolerance {
            return Ok((theta, accepted, residual));
        }
    }
    Err(Error::PassiveNotConverged {
        iterations: accepted,
        residual,
        last: Box::new(PhaseConfig { theta, mode: PhaseMode::Relaxed }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;

    fn quad(lambda: CMatrix, nu: CVector) -> PassiveQuadratic {
        PassiveQuadratic { lambda, nu, zeta: 0.0, c: vec![], g: vec![] }
    }

    #[test]
    fn linear_objective_aligns_phases() {
        let nu = CVector::from_vec(vec![C64::new(0.0, 2.0), C64::new(-3.0, 0.0)]);
        let q = quad(CMatrix::zeros(2, 2), nu);
        let warm = PhaseConfig::zeros(2, PhaseMode::Relaxed);
        let sol = solve_passive(&q, PhaseMode::Relaxed, &warm, &SolverOptions::passive_default()).unwrap();
        assert!((sol.phases.theta[0] - C64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((sol.phases.theta[1] - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_linear_term_gives_zero() {
        let lambda = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(2.0, 0.0), C64::new(0.5, 0.5), C64::new(0.5, -0.5), C64::new(1.0, 0.0)],
        );
        let q = quad(lambda, CVector::zeros(2));
        let warm = PhaseConfig { theta: CVector::from_element(2, C64::new(0.6, 0.8)), mode: PhaseMode::Relaxed };
        let opts = SolverOptions { kkt_tolerance: 1e-12, ..SolverOptions::passive_default() };
        let sol = solve_passive(&q, PhaseMode::Relaxed, &warm, &opts).unwrap();
        assert!(sol.phases.theta.norm() < 1e-8, "{}", sol.phases.theta);
    }

    #[test]
    fn interior_optimum_is_found() {
        // Λ = 4I, ν = (1, i): unconstrained optimum Λ⁻¹ν lies inside the disks.
        let lambda = CMatrix::identity(2, 2) * C64::from(4.0);
        let nu = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        let q = quad(lambda, nu);
        let warm = PhaseConfig::zeros(2, PhaseMode::Relaxed);
        let sol = solve_passive(&q, PhaseMode::Relaxed, &warm, &SolverOptions::passive_default()).unwrap();
        assert!((sol.phases.theta[0] - C64::new(0.25, 0.0)).norm() < 1e-9);
        assert!((sol.phases.theta[1] - C64::new(0.0, 0.25)).norm() < 1e-9);
    }

    #[test]
    fn unit_modulus_projection_of_zero_is_one() {
        let v = CVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(0.0, -0.5)]);
        let p = project_unit_modulus(&v);
        assert_eq!(p[0], C64::new(1.0, 0.0));
        assert!((p[1] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn disk_projection_keeps_phase() {
        let v = CVector::from_vec(vec![C64::new(3.0, 4.0), C64::new(0.1, 0.2)]);
        let p = project_unit_disk(&v);
        assert!((p[0] - C64::new(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(p[1], v[1]);
    }

    #[test]
    fn unit_modulus_output_is_feasible() {
        let lambda = CMatrix::identity(3, 3) * C64::from(10.0);
        let nu = CVector::from_vec(vec![C64::new(1.0, 1.0), C64::new(0.0, 0.0), C64::new(-2.0, 0.5)]);
        let q = quad(lambda, nu);
        let warm = PhaseConfig::zeros(3, PhaseMode::Relaxed);
        let sol = solve_passive(&q, PhaseMode::UnitModulus, &warm, &SolverOptions::passive_default()).unwrap();
        assert!(sol.phases.is_feasible(1e-12));
        assert_eq!(sol.phases.mode, PhaseMode::UnitModulus);
    }

    #[test]
    fn rejects_indefinite_lambda() {
        let lambda = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
        );
        let q = quad(lambda, CVector::zeros(2));
        let warm = PhaseConfig::zeros(2, PhaseMode::Relaxed);
        assert!(matches!(
            solve_passive(&q, PhaseMode::Relaxed, &warm, &SolverOptions::passive_default()),
            Err(Error::Contract(_))
        ));
    }
}
