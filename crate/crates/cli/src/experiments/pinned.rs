use serde_json::json;
use trapwalk_core::lattice::{BoxWindow, ObstacleField, Site};
use trapwalk_core::polymer::{exact_distribution, for_each_path, PolymerWeight, Variant};
use trapwalk_core::rng::derive_seed;
use trapwalk_core::walk::LatticePath;

use super::{finish, num, site_text, stream};
use crate::config::{ExperimentConfig, PinnedSpec};
use crate::error::CliError;
use crate::report::{Check, Report, Table};
use crate::runner::{par_cells, Cancel};

struct CellOut {
    pinned: f64,
    hitting: f64,
    truncation: Option<f64>,
    paths: u64,
    surviving: u64,
    violations: Vec<String>,
}

/// Pinned weight `E[p^{range}; S_N = x]` against the hitting weight
/// `E[p^{|S[0, tau_x^N]|}]`, and the inclusion
/// `{S_N = x, tau_O > N} ⊆ {tau_O > tau_x^N}` checked path by path on
/// sampled fields.
pub(super) fn run(cfg: &ExperimentConfig, spec: &PinnedSpec, cancel: &Cancel) -> Result<Report, CliError> {
    let params = cfg.model.params()?;
    let (d, p) = (params.d(), params.p());
    let n = params.n() as usize;
    if spec.cap < n {
        return Err(CliError::Config(format!("pinned-compare: cap {} is below N = {n}", spec.cap)));
    }
    let mut targets = Vec::new();
    for t in &spec.targets {
        if t.len() != d {
            return Err(CliError::Config(format!("pinned-compare: target {t:?} must have {d} coordinates")));
        }
        let x = Site::new(t);
        if x.l1() as usize > n || (x.l1() as usize + n) % 2 != 0 {
            return Err(CliError::Config(format!("pinned-compare: target {x} unreachable in exactly {n} steps")));
        }
        targets.push(x);
    }
    let w = PolymerWeight::unbiased(d, p)?;
    let window = BoxWindow::centered(d, spec.cap as i32 + 1);
    let results = par_cells(&targets, cancel, |i, &x| {
        let seed = derive_seed(cfg.seed, stream::CELL + i as u64);
        let pinned = exact_distribution(&w, n, Variant::Pinned { x }, None)?.partition;
        let hit =
            exact_distribution(&w, n, Variant::Hitting { x, cap: spec.cap }, Some((cfg.samples, seed)))?;
        let mut paths = 0;
        let mut surviving = 0;
        let mut violations = Vec::new();
        for f in 0..spec.fields {
            let fseed = derive_seed(seed, 1 + f);
            let field = ObstacleField::sample(window, p, fseed)?;
            for_each_path(&w, n, Variant::Pinned { x }, |leaf| {
                paths += 1;
                let path = LatticePath::from_sites(leaf.positions).expect("enumerated paths are connected");
                let rec = path.hitting_record(Some(&field), Some(x), n, None);
                if rec.survives_past(n) {
                    surviving += 1;
                    let ok = rec.tau_target_after_n.is_some_and(|t| rec.survives_past(t));
                    if !ok && violations.len() < 10 {
                        violations.push(format!("field seed {fseed}: {}", path.to_compact()));
                    }
                }
            })?;
        }
        Ok(CellOut { pinned, hitting: hit.partition, truncation: hit.truncation_bound, paths, surviving, violations })
    })?;

    let mut table = Table::new(&[
        "target", "pinnedWeight", "hittingWeight", "truncationBound", "ratio", "pathsChecked", "surviving",
        "violations",
    ]);
    let mut skipped = 0;
    let mut violations = Vec::new();
    let mut bad_ratio = Vec::new();
    for (x, out) in targets.iter().zip(&results) {
        let Some(c) = out else {
            skipped += 1;
            continue;
        };
        let ratio = c.pinned / c.hitting;
        if !ratio.is_finite() {
            bad_ratio.push(format!("({x}): {ratio}"));
        }
        violations.extend(c.violations.iter().map(|v| format!("x=({x}) {v}")));
        table.push(vec![
            site_text(x),
            num(c.pinned),
            num(c.hitting),
            c.truncation.map_or(serde_json::Value::Null, num),
            num(ratio),
            json!(c.paths),
            json!(c.surviving),
            json!(c.violations.len()),
        ]);
    }
    let checks = vec![
        Check::new(
            "pinned-inside-hitting",
            violations.is_empty(),
            if violations.is_empty() { "zero violations".to_string() } else { violations.join("; ") },
        ),
        Check::new(
            "ratio-finite",
            bad_ratio.is_empty(),
            if bad_ratio.is_empty() { "every ratio finite".to_string() } else { bad_ratio.join("; ") },
        ),
    ];
    let summary = json!({ "n": n, "cap": spec.cap, "fields": spec.fields });
    Ok(finish(Report::new(cfg, table, summary, checks), skipped))
}
