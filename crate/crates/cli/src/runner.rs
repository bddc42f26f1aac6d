use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::experiments;
use crate::report::{embedded_config, Report};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "TRAPWALK_WORKERS";

/// Shared cancellation flag. Cells that start after cancellation are skipped
/// and the report is marked incomplete.
#[derive(Clone, Debug, Default)]
pub struct Cancel(Arc<AtomicBool>);

impl Cancel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

/// Run `f` on every cell in parallel, keeping the results in cell order.
/// `None` marks cells skipped because of cancellation.
pub(crate) fn par_cells<T, R>(
    cells: &[T],
    cancel: &Cancel,
    f: impl Fn(usize, &T) -> Result<R, CliError> + Sync + Send,
) -> Result<Vec<Option<R>>, CliError>
where
    T: Sync,
    R: Send,
{
    let out: Vec<Result<Option<R>, CliError>> = cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| if cancel.is_cancelled() { Ok(None) } else { f(i, c).map(Some) })
        .collect();
    out.into_iter().collect()
}

/// Run in the current rayon pool.
pub fn run(cfg: &ExperimentConfig, cancel: &Cancel) -> Result<Report, CliError> {
    cfg.validate()?;
    experiments::dispatch(cfg, cancel)
}

/// Run on a dedicated pool. `workers = 0` uses `TRAPWALK_WORKERS` if set,
/// else the number of cores.
pub fn run_with_workers(cfg: &ExperimentConfig, workers: usize, cancel: &Cancel) -> Result<Report, CliError> {
    let workers = resolve_workers(workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| run(cfg, cancel))
}

fn resolve_workers(workers: usize) -> Result<usize, CliError> {
    if workers > 0 {
        return Ok(workers);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&w| w > 0)
            .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

#[derive(Debug)]
pub struct ReplayOutcome {
    pub report: Report,
    pub identical: bool,
    /// First differing line (1-based) when not identical.
    pub first_difference: Option<usize>,
}

/// Re-run the config embedded in an output file and compare byte for byte.
pub fn replay(original: &str, workers: usize, cancel: &Cancel) -> Result<ReplayOutcome, CliError> {
    let cfg = embedded_config(original)?;
    let format = if original.starts_with('#') { Format::Csv } else { Format::Json };
    let report = run_with_workers(&cfg, workers, cancel)?;
    let fresh = report.render(format)?;
    let identical = fresh == original;
    let first_difference = if identical {
        None
    } else {
        let mut a = original.lines();
        let mut b = fresh.lines();
        let mut i = 1;
        loop {
            match (a.next(), b.next()) {
                (Some(x), Some(y)) if x == y => i += 1,
                _ => break Some(i),
            }
        }
    };
    Ok(ReplayOutcome { report, identical, first_difference })
}
