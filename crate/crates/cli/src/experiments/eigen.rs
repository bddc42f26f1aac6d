use serde_json::json;
use trapwalk_core::lattice::{continuum_lambda, LatticeRegion, Site};
use trapwalk_core::spectral::{log_killed_heat_kernel, principal_eigen};

use super::{finish, num};
use crate::config::{EigenSpec, ExperimentConfig};
use crate::error::CliError;
use crate::report::{Check, Report, Table};
use crate::runner::{par_cells, Cancel};

/// Relative band for the largest ball against the continuum eigenvalue.
const CONTINUUM_BAND: f64 = 0.05;
const EXACT_TOL: f64 = 1e-12;

enum Cell {
    Single,
    Pair,
    Ball(f64),
    Decay,
}

struct Row {
    kind: &'static str,
    radius: f64,
    sites: usize,
    lambda: f64,
    reference: f64,
    extra: f64,
}

/// Principal Dirichlet eigenvalues of balls against the continuum value
/// `lambda_d / R^2`, plus the exact small-domain values and the
/// heat-kernel decay rate.
pub(super) fn run(cfg: &ExperimentConfig, spec: &EigenSpec, cancel: &Cancel) -> Result<Report, CliError> {
    let d = cfg.model.d;
    cfg.model.params()?;
    if spec.radii.iter().any(|r| !(*r >= 0.0)) || !(spec.tol > 0.0) {
        return Err(CliError::Config("eigen: radii must be nonnegative and tol positive".into()));
    }
    let mut cells = vec![Cell::Single, Cell::Pair];
    cells.extend(spec.radii.iter().map(|&r| Cell::Ball(r)));
    cells.push(Cell::Decay);
    let lc = continuum_lambda(d);
    let results = par_cells(&cells, cancel, |_, c| {
        Ok(match *c {
            Cell::Single => {
                let r = LatticeRegion::from_sites([Site::origin(d)]);
                let l = principal_eigen(&r, spec.tol)?.lambda;
                Row { kind: "singleSite", radius: 0.0, sites: 1, lambda: l, reference: 1.0, extra: f64::NAN }
            }
            Cell::Pair => {
                let r = LatticeRegion::from_sites([Site::origin(d), Site::unit(d, 0)]);
                let l = principal_eigen(&r, spec.tol)?.lambda;
                let reference = 1.0 - 1.0 / (2 * d) as f64;
                Row { kind: "adjacentPair", radius: 0.0, sites: 2, lambda: l, reference, extra: f64::NAN }
            }
            Cell::Ball(rad) => {
                let ball = LatticeRegion::ball_at_origin(d, rad);
                let l = principal_eigen(&ball, spec.tol)?.lambda;
                let reference = if rad > 0.0 { lc / (rad * rad) } else { f64::NAN };
                Row { kind: "ball", radius: rad, sites: ball.len(), lambda: l, reference, extra: l * rad * rad }
            }
            Cell::Decay => {
                let ball = LatticeRegion::ball_at_origin(d, spec.decay_radius);
                let l = principal_eigen(&ball, spec.tol)?.lambda;
                let o = Site::origin(d);
                let rate = -log_killed_heat_kernel(&ball, &o, &o, spec.decay_n)? / spec.decay_n as f64;
                Row {
                    kind: "heatKernelDecay",
                    radius: spec.decay_radius,
                    sites: ball.len(),
                    lambda: l,
                    reference: -(1.0 - l).ln(),
                    extra: rate,
                }
            }
        })
    })?;

    let mut table = Table::new(&["kind", "radius", "sites", "lambda", "reference", "lambdaR2OrRate"]);
    let mut checks = Vec::new();
    let mut skipped = 0;
    let mut largest: Option<&Row> = None;
    for r in &results {
        let Some(r) = r else {
            skipped += 1;
            continue;
        };
        table.push(vec![
            json!(r.kind),
            num(r.radius),
            json!(r.sites),
            num(r.lambda),
            num(r.reference),
            num(r.extra),
        ]);
        match r.kind {
            "singleSite" | "adjacentPair" => {
                let err = (r.lambda - r.reference).abs();
                checks.push(Check::new(
                    format!("eigen-{}", r.kind),
                    err <= EXACT_TOL,
                    format!("lambda {} vs {} (error {err:e})", r.lambda, r.reference),
                ));
            }
            "ball" if r.radius > 0.0 => {
                if largest.map_or(true, |b| r.radius > b.radius) {
                    largest = Some(r);
                }
            }
            "heatKernelDecay" => {
                let err = (r.extra - r.reference).abs();
                checks.push(Check::new(
                    "heat-kernel-decay",
                    err <= spec.decay_tolerance,
                    format!(
                        "R={} n={} tol={:e}: -(1/n) log p_n(0,0) = {} vs -log(1-lambda) = {} (error {err:e}, allowed {:e})",
                        r.radius, spec.decay_n, spec.tol, r.extra, r.reference, spec.decay_tolerance
                    ),
                ));
            }
            _ => {}
        }
    }
    if let Some(b) = largest {
        let rel = (b.lambda / b.reference - 1.0).abs();
        checks.push(Check::new(
            "ball-continuum",
            rel <= CONTINUUM_BAND,
            format!("R={}: lambda {} vs {} (relative error {rel:.4})", b.radius, b.lambda, b.reference),
        ));
    }
    let summary = json!({ "continuumLambda": num(lc), "tol": num(spec.tol) });
    Ok(finish(Report::new(cfg, table, summary, checks), skipped))
}
