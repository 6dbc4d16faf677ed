use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::results::create_writer;
use super::{cell_seed, run_cell, CellStatus, ExperimentSpec, SweepRecord, Variant};

/// Mean WSR of one `(L, variant)` group over its non-failed trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub distance_m: f64,
    pub variant: Variant,
    pub mean_wsr: f64,
    /// Standard error of the mean; zero with fewer than two trials.
    pub std_error: f64,
    pub trials: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary(pub Vec<SummaryRow>);

impl SweepSummary {
    pub fn get(&self, distance_m: f64, variant: Variant) -> Option<&SummaryRow> {
        self.0.iter().find(|r| r.distance_m == distance_m && r.variant == variant)
    }
}

impl fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>8}  {:<17} {:>12} {:>10} {:>7} {:>7}",
            "L_m", "variant", "mean_wsr", "std_err", "trials", "failed"
        )?;
        for r in &self.0 {
            writeln!(
                f,
                "{:>8.2}  {:<17} {:>12.4} {:>10.4} {:>7} {:>7}",
                r.distance_m, r.variant, r.mean_wsr, r.std_error, r.trials, r.failed
            )?;
        }
        Ok(())
    }
}

/// Groups records by `(L, variant)` in first-appearance order.
pub fn summarize(records: &[SweepRecord]) -> SweepSummary {
    let mut order: Vec<(f64, Variant)> = Vec::new();
    let mut groups: Vec<Vec<&SweepRecord>> = Vec::new();
    for r in records {
        match order.iter().position(|&(l, v)| l == r.distance_m && v == r.variant) {
            Some(i) => groups[i].push(r),
            None => {
                order.push((r.distance_m, r.variant));
                groups.push(vec![r]);
            }
        }
    }
    let rows = order
        .into_iter()
        .zip(groups)
        .map(|((distance_m, variant), group)| {
            let ok: Vec<f64> = group.iter().filter(|r| r.status != CellStatus::Failed).map(|r| r.wsr_bps_hz).collect();
            let n = ok.len();
            let mean = if n > 0 { ok.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let std_error = if n > 1 {
                let var = ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow { distance_m, variant, mean_wsr: mean, std_error, trials: n, failed: group.len() - n }
        })
        .collect();
    SweepSummary(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// In `(L, variant, trial)` order, same as the file.
    pub records: Vec<SweepRecord>,
    pub summary: SweepSummary,
}

impl SweepOutcome {
    pub fn failed_cells(&self) -> usize {
        self.records.iter().filter(|r| r.status == CellStatus::Failed).count()
    }
}

/// Runs every `(L, variant, trial)` cell of `spec` and writes the records to
/// `spec.output` as they complete, in row order.
///
/// Cells run on a rayon pool of `threads` workers (`0` picks the rayon
/// default). A single writer holds a reorder buffer, so the file always
/// contains a prefix of the final output and is identical for any thread
/// count. On a write error the remaining cells are skipped and the error is
/// returned; rows already written stay on disk.
pub fn run_sweep(spec: &ExperimentSpec, threads: usize) -> Result<SweepOutcome> {
    spec.validate()?;
    let distances = spec.sweep.points();
    let mut cells = Vec::with_capacity(distances.len() * spec.variants.len() * spec.trials);
    for (li, &distance) in distances.iter().enumerate() {
        for &variant in &spec.variants {
            for trial in 0..spec.trials {
                cells.push((distance, variant, cell_seed(spec.seed, li, trial)));
            }
        }
    }
    let mut options = spec.optimizer;
    options.trace = false;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
    let abort = AtomicBool::new(false);
    let path = spec.output.as_path();
    let io_error = |source| Error::Io { path: path.to_path_buf(), source };
    let mut writer = create_writer(path)?;
    let (tx, rx) = mpsc::channel::<(usize, SweepRecord)>();

    std::thread::scope(|scope| {
        let cells = &cells;
        let abort = &abort;
        scope.spawn(move || {
            pool.install(|| {
                cells.par_iter().enumerate().for_each_with(tx, |tx, (i, &(distance, variant, seed))| {
                    if abort.load(Ordering::Relaxed) {
                        return;
                    }
                    let record = run_cell(&spec.scenario, distance, variant, seed, &options, spec.record_wall_time);
                    let _ = tx.send((i, record));
                });
            });
        });

        let mut pending = BTreeMap::new();
        let mut records = Vec::with_capacity(cells.len());
        let result = (|| -> Result<()> {
            for (i, record) in rx.iter() {
                pending.insert(i, record);
                while let Some(record) = pending.remove(&records.len()) {
                    writer.serialize(&record)?;
                    writer.flush().map_err(io_error)?;
                    records.push(record);
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            abort.store(true, Ordering::Relaxed);
            return Err(e);
        }
        debug_assert_eq!(records.len(), cells.len());
        let summary = summarize(&records);
        Ok(SweepOutcome { records, summary })
    })
}
