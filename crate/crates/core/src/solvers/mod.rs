//! Solvers for the two concave QCQP subproblems of the alternating loop.
//!
//! * [`solve_active`]: precoder update under per-BS power budgets, solved
//!   through its Lagrangian stationarity condition with cyclic bisection on
//!   the per-BS dual variables.
//! * [`solve_passive`]: reflection update over the unit disks, solved with
//!   fixed-step projected gradient ascent.

mod active;
mod passive;

pub use active::{kkt_residual_active, solve_active, ActiveSolution};
pub use passive::{
    project_unit_disk, project_unit_modulus, projected_gradient_residual, solve_passive, PassiveSolution,
};

/// Tuning knobs shared by both subsolvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Dual sweeps (active) or gradient steps (passive).
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
    /// Relative power gap at which a single dual bisection stops.
    pub dual_bisection_tolerance: f64,
    /// Factor applied to the gradient step after an objective decrease.
    pub step_shrink: f64,
}

impl SolverOptions {
    pub fn active_default() -> Self {
        SolverOptions { max_iterations: 2000, kkt_tolerance: 1e-9, dual_bisection_tolerance: 1e-13, step_shrink: 0.5 }
    }

    pub fn passive_default() -> Self {
        SolverOptions { max_iterations: 50_000, kkt_tolerance: 1e-8, dual_bisection_tolerance: 1e-13, step_shrink: 0.5 }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.max_iterations == 0
            || !(self.kkt_tolerance > 0.0)
            || !(self.dual_bisection_tolerance > 0.0)
            || !(self.step_shrink > 0.0 && self.step_shrink < 1.0)
        {
            return Err(crate::Error::Contract(format!("invalid solver options {self:?}")));
        }
        Ok(())
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self::active_default()
    }
}

/// Eigenvalue floor (relative) below which a quadratic is rejected as not PSD.
pub(crate) const PSD_TOLERANCE: f64 = 1e-8;
