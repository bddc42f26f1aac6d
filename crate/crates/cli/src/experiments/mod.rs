//! One module per experiment id.

mod confine;
mod detect;
mod eigen;
mod ldp;
mod lyapunov;
mod pinned;
mod suites;
mod survival;

use serde_json::Value;
use trapwalk_core::lattice::{Point, Site};
use trapwalk_core::lyapunov::{estimate_beta, CrossingMethod};
use trapwalk_core::polymer::PolymerWeight;

use crate::config::{ExperimentConfig, ExperimentSpec};
use crate::error::CliError;
use crate::report::Report;
use crate::runner::Cancel;


pub(crate) fn dispatch(cfg: &ExperimentConfig, cancel: &Cancel) -> Result<Report, CliError> {
    match &cfg.spec {
        ExperimentSpec::Survival(s) => survival::run(cfg, s, cancel),
        ExperimentSpec::Eigen(s) => eigen::run(cfg, s, cancel),
        ExperimentSpec::Lyapunov(s) => lyapunov::run(cfg, s, cancel),
        ExperimentSpec::Ldp(s) => ldp::run(cfg, s, cancel),
        ExperimentSpec::Confine(s) => confine::run(cfg, s, cancel),
        ExperimentSpec::Detect(s) => detect::run(cfg, s, cancel),
        ExperimentSpec::PinnedCompare(s) => pinned::run(cfg, s, cancel),
        ExperimentSpec::Suites(s) => suites::run(cfg, s, cancel),
    }
}

/// JSON number, or null for non-finite values.
pub(crate) fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub(crate) fn site_text(s: &Site) -> Value {
    Value::String(format!("({s})"))
}

pub(crate) fn point_text(p: &Point) -> Value {
    let parts: Vec<String> = p.coords().iter().map(|c| format!("{c}")).collect();
    Value::String(format!("({})", parts.join(",")))
}

/// Mark a report partial when any cell was skipped.
pub(crate) fn finish(mut report: Report, skipped: usize) -> Report {
    if skipped > 0 {
        report.complete = false;
        report.checks.push(crate::report::Check::new(
            "complete",
            false,
            format!("{skipped} cells skipped after cancellation"),
        ));
    }
    report
}

/// `beta(e_1)`: the configured value, or a fit by tilted importance sampling.
pub(crate) fn beta_e1(
    given: Option<f64>,
    d: usize,
    p: f64,
    samples: u64,
    seed: u64,
) -> Result<(f64, Option<f64>), CliError> {
    if let Some(b) = given {
        if !(b > 0.0 && b.is_finite()) {
            return Err(CliError::Config(format!("betaE1 = {b} must be positive")));
        }
        return Ok((b, None));
    }
    let w = PolymerWeight::unbiased(d, p)?;
    let fit = estimate_beta(
        &w,
        &Site::unit(d, 0),
        &[2, 4, 6, 8, 12],
        CrossingMethod::TiltedIs { theta: None },
        samples,
        seed,
    )?;
    Ok((fit.beta, Some(fit.stderr)))
}

/// Stream ids used for derived seeds, so experiments never share a stream.
pub(crate) mod stream {
    pub const BETA: u64 = 1 << 40;
    pub const CELL: u64 = 0;
}
