use serde_json::json;
use trapwalk_core::lattice::{BoxWindow, ModelParams, ObstacleField, Point, Site};
use trapwalk_core::rng::derive_seed;
use trapwalk_core::structure::{detect_vacant_ball, DetectConfig};

use super::{finish, num, point_text, site_text, stream};
use crate::config::{DetectSpec, ExperimentConfig};
use crate::error::CliError;
use crate::report::{Check, Report, Table};
use crate::runner::{par_cells, Cancel};

struct CellOut {
    n: u64,
    rho: f64,
    center: Site,
    radius: f64,
    error: f64,
    recount: usize,
    below_threshold: bool,
    coarse_candidate: Option<Site>,
}

/// Occupied sites in the open ball, counted site by site over its bounding
/// box. Squared lattice distances are integers, so compare against the
/// rounded squared radius to keep boundary sites out.
pub(super) fn recount_open_ball(field: &ObstacleField, center: &Site, radius: f64) -> usize {
    let r2 = (radius * radius).round() as i64;
    let r = radius.ceil() as i32;
    let d = center.dim();
    let lo = center.sub(&Site::new(&vec![r; d]));
    let hi = center.add(&Site::new(&vec![r; d]));
    BoxWindow::new(lo, hi).sites().filter(|s| s.sub(center).norm_sq() < r2 && field.is_occupied(s)).count()
}

/// Path length whose `rho_N` is closest to `rho`.
fn n_for_rho(base: &ModelParams, rho: f64) -> Result<ModelParams, CliError> {
    let d = base.d() as f64;
    let n = ((rho / base.rho1()).powf(d + 2.0)).round().max(1.0) as u64;
    Ok(base.with_n(n)?)
}

/// Planted vacant balls of radius `rho_N` in a Bernoulli field: the detector
/// must recover the center within `iota rho_N` and report an obstacle-free ball.
pub(super) fn run(cfg: &ExperimentConfig, spec: &DetectSpec, cancel: &Cancel) -> Result<Report, CliError> {
    let base = cfg.model.params()?;
    let d = base.d();
    if spec.center.len() != d {
        return Err(CliError::Config(format!("detect: center must have {d} coordinates")));
    }
    if spec.rho_list.iter().any(|r| !(*r >= 1.0)) || spec.seeds == 0 {
        return Err(CliError::Config("detect: rhoList entries must be at least 1 and seeds positive".into()));
    }
    let planted = Point::new(&spec.center);
    let dcfg = DetectConfig { iota: spec.iota, rho: spec.rho, ..DetectConfig::default() };
    let cells: Vec<(usize, u64)> =
        (0..spec.rho_list.len()).flat_map(|k| (0..spec.seeds).map(move |s| (k, s))).collect();
    let results = par_cells(&cells, cancel, |i, &(k, _)| {
        let params = n_for_rho(&base, spec.rho_list[k])?;
        let rho = params.rho_n();
        let window = BoxWindow::centered(d, (spec.window_factor * rho).ceil() as i32);
        let field = ObstacleField::sample(window, params.p(), derive_seed(cfg.seed, stream::CELL + i as u64))?
            .with_planted_vacant_ball(planted.clone(), rho);
        let rep = detect_vacant_ball(&field, &params, None, &dcfg)?;
        Ok(CellOut {
            n: params.n(),
            rho,
            center: rep.center,
            radius: rep.radius,
            error: planted.dist_sq_site(&rep.center).sqrt(),
            recount: recount_open_ball(&field, &rep.center, rep.radius),
            below_threshold: rep.below_threshold,
            coarse_candidate: rep.coarse_candidate,
        })
    })?;

    let mut table = Table::new(&[
        "rhoTarget", "seed", "n", "rhoN", "center", "radius", "centerError", "hit", "recount", "belowThreshold",
        "coarseCandidate",
    ]);
    let mut skipped = 0;
    let k = spec.rho_list.len();
    let mut hits = vec![0u64; k];
    let mut totals = vec![0u64; k];
    let mut dirty = Vec::new();
    for (&(ki, s), out) in cells.iter().zip(&results) {
        let Some(c) = out else {
            skipped += 1;
            continue;
        };
        let hit = c.error <= spec.iota * c.rho;
        totals[ki] += 1;
        hits[ki] += hit as u64;
        if c.recount > 0 {
            dirty.push(format!("rho={} seed={s}: {} obstacles", spec.rho_list[ki], c.recount));
        }
        table.push(vec![
            num(spec.rho_list[ki]),
            json!(s),
            json!(c.n),
            num(c.rho),
            site_text(&c.center),
            num(c.radius),
            num(c.error),
            json!(hit),
            json!(c.recount),
            json!(c.below_threshold),
            c.coarse_candidate.as_ref().map_or(serde_json::Value::Null, site_text),
        ]);
    }
    let mut checks = Vec::new();
    for ki in 0..k {
        let need = (spec.min_hit_fraction * spec.seeds as f64).ceil() as u64;
        checks.push(Check::new(
            format!("recovery-rho-{}", spec.rho_list[ki]),
            totals[ki] == spec.seeds && hits[ki] >= need,
            format!("{}/{} seeds within {} rho_N (need {need})", hits[ki], totals[ki], spec.iota),
        ));
    }
    checks.push(Check::new(
        "detected-ball-obstacle-free",
        dirty.is_empty(),
        if dirty.is_empty() { "exact recount found no obstacle in any reported ball".into() } else { dirty.join("; ") },
    ));
    let summary = json!({
        "plantedCenter": point_text(&planted),
        "hits": hits,
        "totals": totals,
        "detector": dcfg,
    });
    Ok(finish(Report::new(cfg, table, summary, checks), skipped))
}
