use serde_json::json;
use trapwalk_core::lattice::Site;
use trapwalk_core::lyapunov::{crossing_probability, estimate_beta, BetaFit, CrossingEstimate, CrossingMethod};
use trapwalk_core::polymer::PolymerWeight;
use trapwalk_core::rng::derive_seed;

use super::{finish, num, site_text, stream};
use crate::config::{ExperimentConfig, LyapunovSpec};
use crate::error::CliError;
use crate::report::{Check, Report, Table};
use crate::runner::{par_cells, Cancel};

/// Standard errors allowed between a Monte Carlo cell and the sandwich.
const MC_SLACK: f64 = 3.0;

enum Cell {
    Fit(Site),
    Exact(Site, usize),
}

enum Out {
    Fit(BetaFit),
    Exact(CrossingEstimate),
}

/// Crossing cells `E[p^{range up to tau_{n v}}]` and fitted `beta(v)` per direction.
pub(super) fn run(cfg: &ExperimentConfig, spec: &LyapunovSpec, cancel: &Cancel) -> Result<Report, CliError> {
    let params = cfg.model.params()?;
    let (d, p) = (params.d(), params.p());
    let mut dirs = Vec::new();
    for v in &spec.directions {
        if v.len() != d || v.iter().all(|&c| c == 0) {
            return Err(CliError::Config(format!("lyapunov: direction {v:?} must be a nonzero {d}-vector")));
        }
        dirs.push(Site::new(v));
    }
    let w = PolymerWeight::unbiased(d, p)?;
    let mut cells: Vec<Cell> = dirs.iter().map(|v| Cell::Fit(*v)).collect();
    for v in &dirs {
        let l1 = v.l1() as usize;
        cells.extend((1..).take_while(|n| n * l1 <= spec.exact_max_l1).map(|n| Cell::Exact(*v, n)));
    }
    let results = par_cells(&cells, cancel, |i, c| {
        let seed = derive_seed(cfg.seed, stream::CELL + i as u64);
        Ok(match *c {
            Cell::Fit(v) => Out::Fit(estimate_beta(&w, &v, &spec.n_list, spec.method, cfg.samples, seed)?),
            Cell::Exact(v, n) => {
                let cap = n * v.l1() as usize + spec.exact_extra;
                Out::Exact(crossing_probability(&w, &v, n, CrossingMethod::ExactEnum { cap }, cfg.samples, seed)?)
            }
        })
    })?;

    let mut table = Table::new(&[
        "direction", "n", "method", "expectation", "stderr", "lower", "upper", "rate", "rateStderr", "inSandwich",
    ]);
    let mut row = |c: &CrossingEstimate, ok: bool| {
        table.push(vec![
            site_text(&c.direction),
            json!(c.n),
            json!(c.method),
            num(c.expectation.value),
            num(c.expectation.stderr),
            num(c.lower),
            num(c.upper),
            num(c.value),
            num(c.stderr),
            json!(ok),
        ]);
    };
    let mut exact_bad = Vec::new();
    let mut mc_bad = Vec::new();
    let mut bracket_bad = Vec::new();
    let mut betas = Vec::new();
    let mut skipped = 0;
    for r in &results {
        match r {
            None => skipped += 1,
            Some(Out::Exact(c)) => {
                let ok = c.within_sandwich(0.0);
                if !ok {
                    exact_bad.push(format!("v=({}) n={}", c.direction, c.n));
                }
                row(c, ok);
            }
            Some(Out::Fit(f)) => {
                for c in &f.cells {
                    let ok = c.within_sandwich(MC_SLACK);
                    if !ok {
                        mc_bad.push(format!("v=({}) n={}", c.direction, c.n));
                    }
                    row(c, ok);
                }
                let l1 = f.direction.l1() as f64;
                let (lo, hi) = (l1 * (1.0 / p).ln(), l1 * (2.0 * d as f64 / p).ln());
                if !(f.beta >= lo && f.beta <= hi) {
                    bracket_bad.push(format!("beta({}) = {} outside [{lo:.4}, {hi:.4}]", f.direction, f.beta));
                }
                betas.push(json!({
                    "direction": site_text(&f.direction),
                    "beta": num(f.beta),
                    "stderr": num(f.stderr),
                    "bracket": [num(lo), num(hi)],
                    "logCoefficient": num(f.log_coefficient),
                    "residualRms": num(f.residual_rms),
                    "flagged": f.flagged,
                    "subadditivityViolations": f.subadditivity_violations,
                }));
            }
        }
    }
    let describe = |bad: &[String], what: &str| {
        if bad.is_empty() {
            format!("all {what} inside")
        } else {
            bad.join("; ")
        }
    };
    let checks = vec![
        Check::new("sandwich-exact-cells", exact_bad.is_empty(), describe(&exact_bad, "exact cells")),
        Check::new("sandwich-mc-cells", mc_bad.is_empty(), describe(&mc_bad, "Monte Carlo cells (3 stderr)")),
        Check::new("beta-trivial-bracket", bracket_bad.is_empty(), describe(&bracket_bad, "fitted norms")),
    ];
    let summary = json!({ "method": spec.method, "fits": betas });
    Ok(finish(Report::new(cfg, table, summary, checks), skipped))
}
