use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ris_cellfree::channel::{realize, rng_stream, RngStream};
use ris_cellfree::experiment::{self, parse_config, validate, Variant};
use ris_cellfree::optimizer::{self, OptimizerOptions};
use ris_cellfree::ScenarioConfig;

#[derive(Parser)]
#[command(version, about = "Joint precoding simulator for RIS-aided cell-free networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the user-cluster distance and write one CSV row per cell.
    Run {
        /// Experiment config file.
        #[arg(short, long)]
        config: PathBuf,
        /// Overrides `output` from the config.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Overrides `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `trials` from the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads; 0 uses every core.
        #[arg(short = 'j', long, default_value_t = 0)]
        parallelism: usize,
    },
    /// Run one optimization and print its per-iteration trace.
    Single {
        /// Experiment config file; the reference scenario when omitted.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// User-cluster distance in meters.
        #[arg(short = 'L', long, default_value_t = 40.0)]
        distance: f64,
        #[arg(long, default_value = "ideal-ris")]
        variant: Variant,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check model invariants on small random instances.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
}

fn run(
    config: PathBuf,
    output: Option<PathBuf>,
    seed: Option<u64>,
    trials: Option<usize>,
    threads: usize,
) -> Result<bool> {
    let mut spec = parse_config(&config)?;
    if let Some(output) = output {
        spec.output = output;
    }
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(trials) = trials {
        spec.trials = trials;
    }
    let outcome =
        experiment::run_sweep(&spec, threads).with_context(|| format!("sweep into {}", spec.output.display()))?;
    print!("{}", outcome.summary);
    let failed = outcome.failed_cells();
    println!("{} records written to {}", outcome.records.len(), spec.output.display());
    if failed > 0 {
        eprintln!("{failed} cells failed");
    }
    Ok(failed == 0)
}

fn single(config: Option<PathBuf>, distance: f64, variant: Variant, seed: u64) -> Result<bool> {
    let (base, mut options) = match config {
        Some(path) => {
            let spec = parse_config(&path)?;
            (spec.scenario, spec.optimizer)
        }
        None => (ScenarioConfig::reference(), OptimizerOptions::default()),
    };
    options.trace = true;
    let mut scenario = variant.scenario(&base.at_distance(distance));
    scenario.seed = seed;
    let (_, channels) = realize(&scenario)?;
    let result = optimizer::run(
        &scenario,
        &channels,
        variant.phase_mode(),
        &options,
        &mut rng_stream(seed, RngStream::Initialization),
    )?;
    println!("initial WSR {:.6} bit/s/Hz", result.initial_wsr);
    println!("{:>4} {:>12} {:>12} {:>8} {:>8}  bs_power", "iter", "wsr", "surrogate", "sweeps", "pg_iter");
    for t in &result.trace {
        let powers: Vec<String> = t.bs_power.iter().map(|p| format!("{p:.4}")).collect();
        println!(
            "{:>4} {:>12.6} {:>12.6} {:>8} {:>8}  {}",
            t.iteration,
            t.wsr,
            t.surrogate[4],
            t.active_sweeps,
            t.passive_iterations,
            powers.join(" ")
        );
    }
    println!(
        "final WSR {:.6} bit/s/Hz after {} iterations ({})",
        result.final_wsr(),
        result.iterations_used,
        if result.converged { "converged" } else { "iteration cap" }
    );
    Ok(true)
}

fn check(seed: u64, instances: usize) -> Result<bool> {
    if instances == 0 {
        bail!("--instances must be at least 1");
    }
    let results = validate::run_suite(seed, instances)?;
    for r in &results {
        println!("{r}");
    }
    Ok(results.iter().all(|r| r.passed()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, output, seed, trials, parallelism } => run(config, output, seed, trials, parallelism),
        Command::Single { config, distance, variant, seed } => single(config, distance, variant, seed),
        Command::Validate { seed, instances } => check(seed, instances),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
