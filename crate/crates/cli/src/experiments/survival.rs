use serde_json::json;
use trapwalk_core::polymer::{annealed_survival_estimate, PolymerWeight};
use trapwalk_core::rng::derive_seed;

use super::{finish, num, stream};
use crate::config::{ExperimentConfig, SurvivalSpec};
use crate::error::CliError;
use crate::report::{Check, Report, Table};
use crate::runner::{par_cells, Cancel};

/// Annealed survival `E[p^{|range|}]` over an N grid, with the normalized
/// rate `-log E / N^{d/(d+2)}` next to the continuum constant.
pub(super) fn run(cfg: &ExperimentConfig, spec: &SurvivalSpec, cancel: &Cancel) -> Result<Report, CliError> {
    let params = cfg.model.params()?;
    let (d, p) = (params.d(), params.p());
    if spec.n_list.is_empty() || spec.n_list.contains(&0) {
        return Err(CliError::Config("survival: nList must hold positive lengths".into()));
    }
    let w = PolymerWeight::unbiased(d, p)?;
    let cells: Vec<(u64, u64)> =
        spec.n_list.iter().flat_map(|&n| (0..cfg.replicas).map(move |r| (n, r))).collect();
    let results = par_cells(&cells, cancel, |i, &(n, _)| {
        let seed = derive_seed(cfg.seed, stream::CELL + i as u64);
        Ok(annealed_survival_estimate(&w, n as usize, spec.method, cfg.samples, seed)?)
    })?;

    let mut table = Table::new(&["n", "replica", "estimate", "stderr", "logEstimate", "normalizedRate", "cdp"]);
    let mut checks = Vec::new();
    let mut skipped = 0;
    let mut bad = Vec::new();
    for (&(n, r), est) in cells.iter().zip(&results) {
        let Some(e) = est else {
            skipped += 1;
            continue;
        };
        let scale = (n as f64).powf(d as f64 / (d as f64 + 2.0));
        let rate = -e.value.ln() / scale;
        // p^{N+1} <= E[p^{range}] <= p, since 2 <= |range| <= N + 1.
        let lo = p.powf(n as f64 + 1.0);
        if !(e.value >= lo * (1.0 - 1e-12) - 3.0 * e.stderr && e.value <= p + 3.0 * e.stderr) {
            bad.push(format!("n={n} replica={r}: {} outside [{lo:e}, {p}]", e.value));
        }
        table.push(vec![
            json!(n),
            json!(r),
            num(e.value),
            num(e.stderr),
            num(e.value.ln()),
            num(rate),
            num(params.cdp()),
        ]);
    }
    checks.push(Check::new(
        "survival-trivial-bounds",
        bad.is_empty(),
        if bad.is_empty() { "all cells within [p^(N+1), p]".to_string() } else { bad.join("; ") },
    ));
    let summary = json!({ "method": spec.method, "cdp": num(params.cdp()), "rho1": num(params.rho1()) });
    Ok(finish(Report::new(cfg, table, summary, checks), skipped))
}
