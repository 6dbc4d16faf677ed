//! Invariant checks on small random instances, run by the `validate`
//! subcommand.

use std::fmt;

use rand::Rng;

use crate::channel::{
    default_bs_positions, default_ris_positions, generate_channels, place_users, rng_stream, ChannelSet, Dimensions,
    RngStream, ScenarioConfig,
};
use crate::error::Result;
use crate::fp::{
    active_transform_objective, build_active_quadratic, build_passive_quadratic, lagrangian_objective, mu_weights,
    passive_transform_objective, update_rho, update_varpi, update_xi, weighted_fraction_sum, weighted_fraction_sum_at,
};
use crate::metrics::{effective_channel, per_bs_power, wsr, wsr_at, PhaseConfig, PhaseMode};
use crate::optimizer::{initialize, run_from, OptimizerOptions};

/// Random small scenario: `B ≤ 2`, `R ≤ 2`, `K ≤ 4`, `P ≤ 3`, `M ≤ 4`,
/// `U ≤ 2`, `N ≤ 8`, users 15 to 65 m away, randomized budgets and weights.
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R) -> ScenarioConfig {
    let dims = Dimensions {
        num_bs: rng.random_range(1..=2),
        num_ris: rng.random_range(0..=2),
        num_users: rng.random_range(1..=4),
        num_subcarriers: rng.random_range(1..=3),
        bs_antennas: rng.random_range(1..=4),
        user_antennas: rng.random_range(1..=2),
        ris_elements: rng.random_range(1..=8),
    };
    let mut cfg = ScenarioConfig::reference();
    cfg.dims = dims;
    cfg.bs_positions = default_bs_positions()[..dims.num_bs].to_vec();
    cfg.ris_positions = default_ris_positions()[..dims.num_ris].to_vec();
    cfg.user_circle_center = [rng.random_range(15.0..65.0), 0.0];
    cfg.max_power = (0..dims.num_bs).map(|_| rng.random_range(0.5..2.0)).collect();
    cfg.weights = (0..dims.num_users).map(|_| rng.random_range(0.5..1.5)).collect();
    cfg.seed = rng.random();
    cfg
}

/// [`random_scenario`] from `seed`, plus its users' channels.
pub fn random_instance(seed: u64) -> Result<(ScenarioConfig, ChannelSet)> {
    let cfg = random_scenario(&mut rng_stream(seed, RngStream::Initialization));
    let users = place_users(&cfg, &mut rng_stream(cfg.seed, RngStream::UserPlacement));
    let channels = generate_channels(&cfg, &users, &mut rng_stream(cfg.seed, RngStream::Channels))?;
    Ok((cfg, channels))
}

/// Outcome of one invariant over all instances.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    /// Largest violation seen.
    pub worst: f64,
    pub tolerance: f64,
    pub instances: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} worst {:.3e} (tolerance {:.0e}, {} instances)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance,
            self.instances
        )
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    worst: f64,
    instances: usize,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Tally { name, tolerance, worst: 0.0, instances: 0 }
    }

    fn record(&mut self, violation: f64) {
        // NaN counts as a failure.
        self.worst = if violation.is_nan() { f64::INFINITY } else { self.worst.max(violation) };
    }

    fn finish(self) -> CheckResult {
        CheckResult { name: self.name, worst: self.worst, tolerance: self.tolerance, instances: self.instances }
    }
}

/// Runs the invariant suite on `instances` random instances derived from
/// `seed`. Errors from the model are propagated.
pub fn run_suite(seed: u64, instances: usize) -> Result<Vec<CheckResult>> {
    let mut identities = Tally::new("fp-identities", 1e-9);
    let mut quadratics = Tally::new("quadratic-consistency", 1e-10);
    let mut monotone = Tally::new("monotone-trace", 1e-8);
    let mut feasible = Tally::new("feasibility", 1e-9);
    let mut no_ris = Tally::new("no-ris-reduction", 0.0);
    let options = OptimizerOptions { max_outer_iterations: 30, ..OptimizerOptions::default() };

    for i in 0..instances {
        let (cfg, channels) = random_instance(seed.wrapping_add(i as u64))?;
        let mut rng = rng_stream(cfg.seed, RngStream::Initialization);
        let noise = cfg.noise_power;
        let (phases, w) = initialize(&cfg, PhaseMode::Relaxed, &mut rng);
        let h = effective_channel(&channels, &phases)?;

        let rho = update_rho(&h, &w, noise)?;
        let mu = mu_weights(&cfg.dims, &cfg.weights, &rho);
        let xi = update_xi(&h, &w, &mu, noise)?;
        identities
            .record(rel(lagrangian_objective(&h, &w, &rho, &cfg.weights, noise)?, wsr(&h, &w, noise, &cfg.weights)?));
        identities.record(rel(
            active_transform_objective(&h, &w, &xi, &mu, noise)?,
            weighted_fraction_sum(&h, &w, &mu, noise)?,
        ));

        let (other_phases, other_w) = initialize(&cfg, PhaseMode::Relaxed, &mut rng);
        let quad = build_active_quadratic(&h, &xi, &mu, noise);
        quadratics.record(rel(quad.objective(&other_w), active_transform_objective(&h, &other_w, &xi, &mu, noise)?));

        if cfg.dims.num_ris > 0 {
            let varpi = update_varpi(&channels, &phases, &w, &mu, noise)?;
            identities.record(rel(
                passive_transform_objective(&channels, &phases, &w, &varpi, &mu, noise)?,
                weighted_fraction_sum_at(&channels, &phases, &w, &mu, noise)?,
            ));
            let pq = build_passive_quadratic(&channels, &w, &varpi, &mu, noise);
            quadratics.record(rel(
                pq.objective(&other_phases.theta),
                passive_transform_objective(&channels, &other_phases, &w, &varpi, &mu, noise)?,
            ));
        }
        identities.instances += 1;
        quadratics.instances += 1;

        let result = run_from(&cfg, &channels, phases, w, &options)?;
        let mut previous = result.initial_wsr;
        for &value in &result.wsr_trace {
            monotone.record(previous - value);
            previous = value;
        }
        monotone.instances += 1;
        for (power, budget) in per_bs_power(&result.precoder).iter().zip(&cfg.max_power) {
            feasible.record(power - budget);
        }
        feasible.record(result.phases.violation());
        feasible.instances += 1;

        let bare = cfg.without_ris();
        let (_, bare_channels) = crate::channel::realize(&bare)?;
        let zero = PhaseConfig::zeros(0, PhaseMode::Relaxed);
        let reference = wsr_at(&bare_channels, &zero, &result.precoder, noise, &cfg.weights)?;
        if cfg.dims.num_ris > 0 {
            let off = PhaseConfig::zeros(cfg.dims.stacked_ris(), PhaseMode::Relaxed);
            no_ris.record((wsr_at(&channels, &off, &result.precoder, noise, &cfg.weights)? - reference).abs());
        }
        no_ris.instances += 1;
    }
    Ok(vec![identities.finish(), quadratics.finish(), monotone.finish(), feasible.finish(), no_ris.finish()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_respect_bounds() {
        for seed in 0..50 {
            let (cfg, ch) = random_instance(seed).unwrap();
            let d = cfg.dims;
            assert!(d.num_bs <= 2 && d.num_ris <= 2 && d.num_users <= 4 && d.num_subcarriers <= 3);
            assert!(d.bs_antennas <= 4 && d.user_antennas <= 2 && d.ris_elements <= 8);
            assert_eq!(*ch.dims(), d);
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn suite_passes_on_a_few_instances() {
        for check in run_suite(11, 4).unwrap() {
            assert!(check.passed(), "{check}");
        }
    }
}
