//! Alternating joint precoding: `ρ → ξ → W → ϖ → θ`, repeated until the
//! weighted sum-rate stops improving.

use std::f64::consts::PI;

use rand::Rng;

use crate::channel::{ChannelSet, ScenarioConfig};
use crate::error::{Error, Result};
use crate::fp::{
    build_active_quadratic, build_passive_quadratic, lagrangian_objective, mu_weights, update_rho, update_varpi,
    update_xi,
};
use crate::linalg::{CVector, C64};
use crate::metrics::{effective_channel, per_bs_power, wsr, PhaseConfig, PhaseMode, Precoder};
use crate::solvers::{solve_active, solve_passive, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub max_outer_iterations: usize,
    /// Stop once `|ΔWSR| / max(WSR, 1)` falls below this.
    pub wsr_relative_tolerance: f64,
    pub active: SolverOptions,
    pub passive: SolverOptions,
    /// Relative weight of the proximal term anchoring each precoder update at
    /// the previous precoder; see [`ActiveQuadratic::with_proximal`].
    ///
    /// [`ActiveQuadratic::with_proximal`]: crate::fp::ActiveQuadratic::with_proximal
    pub proximal_weight: f64,
    /// Record a [`TraceRecord`] per outer iteration.
    pub trace: bool,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            max_outer_iterations: 100,
            wsr_relative_tolerance: 1e-4,
            active: SolverOptions::active_default(),
            passive: SolverOptions::passive_default(),
            proximal_weight: 1e-9,
            trace: false,
        }
    }
}

/// Diagnostics for one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub wsr: f64,
    /// Lagrangian surrogate after the ρ, ξ, W, ϖ and θ updates. The last two
    /// repeat the W value when there is no RIS.
    pub surrogate: [f64; 5],
    pub bs_power: Vec<f64>,
    pub active_sweeps: usize,
    pub passive_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub phases: PhaseConfig,
    pub precoder: Precoder,
    /// WSR at the initial point, before the first outer iteration.
    pub initial_wsr: f64,
    /// WSR after each outer iteration.
    pub wsr_trace: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// Filled only when [`OptimizerOptions::trace`] is set.
    pub trace: Vec<TraceRecord>,
}

impl OptimizationResult {
    pub fn final_wsr(&self) -> f64 {
        self.wsr_trace.last().copied().unwrap_or(self.initial_wsr)
    }
}

/// Random feasible starting point.
///
/// Reflection coefficients are uniform on the unit disk (relaxed) or the unit
/// circle (unit-modulus). Precoder entries share one magnitude per BS with
/// uniform random phases, scaled so every BS spends exactly its budget.
pub fn initialize<R: Rng + ?Sized>(config: &ScenarioConfig, mode: PhaseMode, rng: &mut R) -> (PhaseConfig, Precoder) {
    let d = config.dims;
    let theta = CVector::from_fn(d.stacked_ris(), |_, _| {
        let r = match mode {
            PhaseMode::Relaxed => rng.random::<f64>().sqrt(),
            PhaseMode::UnitModulus => 1.0,
        };
        C64::from_polar(r, 2.0 * PI * rng.random::<f64>())
    });
    let per_entry = d.num_subcarriers * d.num_users * d.bs_antennas;
    let mut w = Precoder::zeros(&d);
    for x in w.iter_mut() {
        for (i, entry) in x.iter_mut().enumerate() {
            let b = i / d.bs_antennas;
            let magnitude = (config.max_power[b] / per_entry as f64).sqrt();
            *entry = C64::from_polar(magnitude, 2.0 * PI * rng.random::<f64>());
        }
    }
    (PhaseConfig { theta, mode }, w)
}

/// Runs the alternating optimizer from a random start drawn from `rng`.
pub fn run<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    mode: PhaseMode,
    options: &OptimizerOptions,
    rng: &mut R,
) -> Result<OptimizationResult> {
    let (phases, precoder) = initialize(config, mode, rng);
    run_from(config, channels, phases, precoder, options)
}

/// Runs the alternating optimizer from a given starting point. The phase
/// constraint set is taken from `phases.mode`.
pub fn run_from(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    mut phases: PhaseConfig,
    mut w: Precoder,
    options: &OptimizerOptions,
) -> Result<OptimizationResult> {
    config.validate()?;
    if *channels.dims() != config.dims {
        return Err(Error::Contract("channel dimensions differ from the scenario".into()));
    }
    if !(options.wsr_relative_tolerance > 0.0) || !(options.proximal_weight >= 0.0) || options.max_outer_iterations == 0
    {
        return Err(Error::Contract(format!("invalid optimizer options {options:?}")));
    }
    let noise = config.noise_power;
    let weights = &config.weights;
    let has_ris = config.dims.num_ris > 0;
    let mode = phases.mode;

    let mut h = effective_channel(channels, &phases)?;
    let initial_wsr = wsr(&h, &w, noise, weights)?;
    let mut previous = initial_wsr;
    let mut wsr_trace = Vec::new();
    let mut trace = Vec::new();
    let mut duals: Option<Vec<f64>> = None;
    let mut converged = false;

    for iteration in 1..=options.max_outer_iterations {
        let fail = |source: Error, trace: &[f64]| Error::Optimizer {
            iteration,
            trace: trace.to_vec(),
            source: Box::new(source),
        };
        let surrogate = |h: &_, w: &_, rho: &[f64]| lagrangian_objective(h, w, rho, weights, noise);
        let mut steps = [f64::NAN; 5];

        let rho = update_rho(&h, &w, noise)?;
        let mu = mu_weights(&config.dims, weights, &rho);
        steps[0] = surrogate(&h, &w, &rho)?;

        let xi = update_xi(&h, &w, &mu, noise)?;
        steps[1] = steps[0];

        let quad = build_active_quadratic(&h, &xi, &mu, noise).with_proximal(&w, options.proximal_weight);
        let active = solve_active(&quad, &config.max_power, duals.as_deref(), &options.active)
            .map_err(|e| fail(e, &wsr_trace))?;
        duals = Some(active.duals);
        // At high SINR the quadratic cannot resolve rounding-level SINR
        // losses, so a step that lowers the surrogate is dropped.
        let value = surrogate(&h, &active.precoder, &rho)?;
        if value >= steps[1] {
            w = active.precoder;
            steps[2] = value;
        } else {
            steps[2] = steps[1];
        }

        let mut passive_iterations = 0;
        if has_ris {
            let varpi = update_varpi(channels, &phases, &w, &mu, noise)?;
            steps[3] = steps[2];
            let pq = build_passive_quadratic(channels, &w, &varpi, &mu, noise);
            let passive = solve_passive(&pq, mode, &phases, &options.passive).map_err(|e| fail(e, &wsr_trace))?;
            passive_iterations = passive.iterations;
            let moved = effective_channel(channels, &passive.phases)?;
            let value = surrogate(&moved, &w, &rho)?;
            // The unit-modulus projection may lower the surrogate by design.
            if mode == PhaseMode::UnitModulus || value >= steps[3] {
                phases = passive.phases;
                h = moved;
                steps[4] = value;
            } else {
                steps[4] = steps[3];
            }
        } else {
            steps[3] = steps[2];
            steps[4] = steps[2];
        }

        let value = wsr(&h, &w, noise, weights)?;
        wsr_trace.push(value);
        if options.trace {
            trace.push(TraceRecord {
                iteration,
                wsr: value,
                surrogate: steps,
                bs_power: per_bs_power(&w),
                active_sweeps: active.sweeps,
                passive_iterations,
            });
        }
        if (value - previous).abs() / value.max(1.0) < options.wsr_relative_tolerance {
            converged = true;
            break;
        }
        previous = value;
    }

    Ok(OptimizationResult {
        phases,
        precoder: w,
        initial_wsr,
        iterations_used: wsr_trace.len(),
        wsr_trace,
        converged,
        trace,
    })
}
