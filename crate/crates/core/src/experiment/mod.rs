//! Monte-Carlo distance sweeps and their CSV output.

mod config;
mod results;
mod sweep;
pub mod validate;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::{realize, rng_stream, RngStream, ScenarioConfig};
use crate::error::Error;
use crate::metrics::PhaseMode;
use crate::optimizer::{run, OptimizerOptions};

pub use config::{parse_config, parse_config_str, ExperimentSpec, SweepRange};
pub use results::{emit_results, read_results, CellStatus, SweepRecord, CSV_HEADER};
pub use sweep::{run_sweep, summarize, SummaryRow, SweepOutcome, SweepSummary};

/// System variant compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Cell-free network alone; RISs removed.
    #[serde(rename = "no-ris")]
    NoRis,
    /// RIS with reflection coefficients in the unit disk.
    #[serde(rename = "ideal-ris")]
    IdealRis,
    /// RIS restricted to unit-modulus coefficients.
    #[serde(rename = "continuous-phase")]
    ContinuousPhase,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::NoRis, Variant::IdealRis, Variant::ContinuousPhase];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::NoRis => "no-ris",
            Variant::IdealRis => "ideal-ris",
            Variant::ContinuousPhase => "continuous-phase",
        }
    }

    pub fn phase_mode(self) -> PhaseMode {
        match self {
            Variant::ContinuousPhase => PhaseMode::UnitModulus,
            _ => PhaseMode::Relaxed,
        }
    }

    /// Scenario actually simulated for this variant.
    pub fn scenario(self, base: &ScenarioConfig) -> ScenarioConfig {
        match self {
            Variant::NoRis => base.without_ris(),
            _ => base.clone(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (expected no-ris, ideal-ris or continuous-phase)"))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one sweep cell. Independent of the variant, so every variant
/// sees the same users and channels at a given `(L, trial)`.
pub fn cell_seed(seed: u64, distance_index: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ distance_index as u64) ^ trial as u64)
}

/// Runs one `(L, variant, trial)` cell. Optimizer failures produce a record
/// with status [`CellStatus::Failed`] and the last completed WSR.
pub fn run_cell(
    base: &ScenarioConfig,
    distance_m: f64,
    variant: Variant,
    seed: u64,
    options: &OptimizerOptions,
    record_wall_time: bool,
) -> SweepRecord {
    let start = Instant::now();
    let mut scenario = variant.scenario(&base.at_distance(distance_m));
    scenario.seed = seed;
    let outcome = realize(&scenario).and_then(|(_, channels)| {
        let mut rng = rng_stream(seed, RngStream::Initialization);
        run(&scenario, &channels, variant.phase_mode(), options, &mut rng)
    });
    let (wsr_bps_hz, iterations, status) = match outcome {
        Ok(r) => {
            let status = if r.converged { CellStatus::Converged } else { CellStatus::NotConverged };
            (r.final_wsr(), r.iterations_used, status)
        }
        Err(Error::Optimizer { trace, .. }) => (trace.last().copied().unwrap_or(0.0), trace.len(), CellStatus::Failed),
        Err(_) => (0.0, 0, CellStatus::Failed),
    };
    SweepRecord {
        distance_m,
        variant,
        seed,
        wsr_bps_hz,
        iterations,
        status,
        wall_s: if record_wall_time { start.elapsed().as_secs_f64() } else { 0.0 },
    }
}
