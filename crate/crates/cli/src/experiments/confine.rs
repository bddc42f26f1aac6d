use serde_json::json;
use trapwalk_core::lattice::{LatticeRegion, Point, Site};
use trapwalk_core::polymer::{GibbsConfig, GibbsSampler, PolymerWeight};
use trapwalk_core::rng::derive_seed;
use trapwalk_core::stats::integrated_autocorrelation_time;
use trapwalk_core::structure::{detect_vacant_ball, DetectConfig};
use trapwalk_core::walk::LatticePath;

use super::{beta_e1, finish, num, stream};
use crate::config::{ConfineSpec, ExperimentConfig};
use crate::error::CliError;
use crate::report::{Check, Report, Table};
use crate::runner::{par_cells, Cancel};

/// Standard errors allowed for the `h = 0` symmetry check.
const SYMMETRY_SLACK: f64 = 3.0;

struct CellOut {
    rho: f64,
    half_width: i32,
    kept: usize,
    mean: f64,
    sd: f64,
    tau: f64,
    stderr: f64,
    sandwich: f64,
    detected_sandwich: Option<f64>,
    detections: usize,
    shift_acceptance: f64,
}

/// `B(c, (1-eps) r) ⊆ range ⊆ B(c, (1+eps) r)`.
fn sandwiched(path: &LatticePath, inner: &[Site], center: &Point, outer: f64) -> bool {
    let visits = path.visits();
    let outer_sq = outer * outer;
    inner.iter().all(|s| visits.contains_key(s)) && visits.keys().all(|s| center.dist_sq_site(s) <= outer_sq)
}

fn run_cell(
    cfg: &ExperimentConfig,
    spec: &ConfineSpec,
    n: u64,
    sweeps: u64,
    seed: u64,
    cancel: &Cancel,
) -> Result<Option<CellOut>, CliError> {
    let params = cfg.model.params_at(n)?;
    let d = params.d();
    let rho = params.rho_n();
    let dir = params.e_h().unwrap_or_else(|| Site::unit(d, 0).to_point());
    let w = PolymerWeight::new(d, params.p(), params.h().coords())?;
    let half_width = (spec.chain.window_factor * rho).ceil() as i32;
    let mut gc = GibbsConfig::new(half_width);
    gc.shift_range = ((spec.chain.shift_range_factor * rho).round() as i32).max(1);
    let mut g = GibbsSampler::new(&w, n as usize, gc, seed)?;

    let center = dir.scale(rho);
    let inner: Vec<Site> = LatticeRegion::ball(center.clone(), (1.0 - spec.epsilon) * rho).sites();
    let outer = (1.0 + spec.epsilon) * rho;
    let burn = (spec.chain.burn_in_fraction * sweeps as f64).floor() as u64;
    let dcfg = DetectConfig::default();
    let mut xs = Vec::new();
    let mut hits = 0usize;
    let (mut det_n, mut det_hits) = (0usize, 0usize);
    for s in 0..sweeps {
        if cancel.is_cancelled() {
            return Ok(None);
        }
        g.sweep()?;
        if s < burn {
            continue;
        }
        xs.push(g.translation_averaged_drift(&dir) / rho);
        let path = g.path();
        if sandwiched(&path, &inner, &center, outer) {
            hits += 1;
        }
        if spec.detect_every > 0 && (s - burn) % spec.detect_every == 0 {
            let report = detect_vacant_ball(&g.field(), &params, Some(&path), &dcfg)?;
            let c = report.center.to_point();
            let inner_c = LatticeRegion::ball(c.clone(), (1.0 - spec.epsilon) * rho).sites();
            det_n += 1;
            if sandwiched(&path, &inner_c, &c, outer) {
                det_hits += 1;
            }
        }
    }
    let kept = xs.len();
    if kept < 2 {
        return Err(CliError::Config(format!("confine: N={n} keeps {kept} sweeps after burn-in; need at least 2")));
    }
    let mean = xs.iter().sum::<f64>() / kept as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (kept - 1) as f64).sqrt();
    let tau = integrated_autocorrelation_time(&xs).max(1.0);
    let st = g.stats();
    Ok(Some(CellOut {
        rho,
        half_width,
        kept,
        mean,
        sd,
        tau,
        stderr: sd * (tau / kept as f64).sqrt(),
        sandwich: hits as f64 / kept as f64,
        detected_sandwich: (det_n > 0).then(|| det_hits as f64 / det_n as f64),
        detections: det_n,
        shift_acceptance: if st.shifts_proposed > 0 {
            st.shifts_accepted as f64 / st.shifts_proposed as f64
        } else {
            f64::NAN
        },
    }))
}

/// Samples `mu_N^h` with the joint Gibbs sampler over an N grid and reports
/// the projected endpoint `<S_N, e_h> / rho_N` (translation-averaged
/// estimator) and the frequency of the ball sandwich around `rho_N e_h`.
pub(super) fn run(cfg: &ExperimentConfig, spec: &ConfineSpec, cancel: &Cancel) -> Result<Report, CliError> {
    let params = cfg.model.params()?;
    let d = params.d();
    if spec.n_list.is_empty() || spec.n_list.windows(2).any(|w| w[0] >= w[1]) || spec.n_list[0] == 0 {
        return Err(CliError::Config("confine: nList must be positive and increasing".into()));
    }
    if !(spec.epsilon > 0.0 && spec.epsilon < 1.0) {
        return Err(CliError::Config("confine: epsilon must lie in (0, 1)".into()));
    }
    if !(spec.chain.window_factor > 1.0) || !(0.0..1.0).contains(&spec.chain.burn_in_fraction) {
        return Err(CliError::Config("confine: windowFactor must exceed 1 and burnInFraction lie in [0, 1)".into()));
    }
    let h_norm = params.h().norm();
    let (beta1, beta1_se) = if h_norm > 0.0 {
        let (b, se) = beta_e1(spec.beta_e1, d, params.p(), cfg.samples, derive_seed(cfg.seed, stream::BETA))?;
        (Some(b), se)
    } else {
        (None, None)
    };
    // Isotropic approximation of the dual norm: beta*(h) = |h| / beta(e_1).
    let beta_star = beta1.map_or(0.0, |b| h_norm / b);

    let cells: Vec<(usize, u64)> =
        (0..spec.n_list.len()).flat_map(|k| (0..cfg.replicas).map(move |r| (k, r))).collect();
    let results = par_cells(&cells, cancel, |i, &(k, _)| {
        let seed = derive_seed(cfg.seed, stream::CELL + i as u64);
        run_cell(cfg, spec, spec.n_list[k], spec.sweeps[k], seed, cancel)
    })?;

    let mut table = Table::new(&[
        "n", "replica", "rhoN", "halfWidth", "sweepsKept", "projectedMean", "sd", "tau", "stderr",
        "sandwichFrequency", "detectedSandwichFrequency", "detections", "shiftAcceptance",
    ]);
    let mut skipped = 0;
    // Per-N aggregates over replicas: (mean, stderr, sandwich, sandwich stderr).
    let mut per_n: Vec<Option<(f64, f64, f64, f64)>> = vec![None; spec.n_list.len()];
    let mut acc: Vec<Vec<&CellOut>> = vec![Vec::new(); spec.n_list.len()];
    for (&(k, r), out) in cells.iter().zip(&results) {
        let Some(Some(c)) = out else {
            skipped += 1;
            continue;
        };
        table.push(vec![
            json!(spec.n_list[k]),
            json!(r),
            num(c.rho),
            json!(c.half_width),
            json!(c.kept),
            num(c.mean),
            num(c.sd),
            num(c.tau),
            num(c.stderr),
            num(c.sandwich),
            c.detected_sandwich.map_or(serde_json::Value::Null, num),
            json!(c.detections),
            num(c.shift_acceptance),
        ]);
        acc[k].push(c);
    }
    for (k, cs) in acc.iter().enumerate() {
        if cs.len() as u64 != cfg.replicas {
            continue;
        }
        let m = cs.len() as f64;
        let mean = cs.iter().map(|c| c.mean).sum::<f64>() / m;
        let se = cs.iter().map(|c| c.stderr * c.stderr).sum::<f64>().sqrt() / m;
        let sw = cs.iter().map(|c| c.sandwich).sum::<f64>() / m;
        // Sandwich indicators are autocorrelated like the drift; reuse its tau.
        let sw_se = cs
            .iter()
            .map(|c| c.sandwich * (1.0 - c.sandwich) * c.tau / c.kept as f64)
            .sum::<f64>()
            .sqrt()
            / m;
        per_n[k] = Some((mean, se, sw, sw_se));
    }

    let mut checks = Vec::new();
    let done: Vec<(u64, (f64, f64, f64, f64))> =
        spec.n_list.iter().zip(&per_n).filter_map(|(&n, a)| a.map(|a| (n, a))).collect();
    let trend: Vec<String> = done.iter().map(|(n, a)| format!("N={n}: {:.4} ± {:.4}", a.0, a.1)).collect();
    if h_norm == 0.0 {
        let bad: Vec<String> = done
            .iter()
            .filter(|(_, a)| a.0.abs() > SYMMETRY_SLACK * a.1)
            .map(|(n, a)| format!("N={n}: {:.4} ± {:.4}", a.0, a.1))
            .collect();
        checks.push(Check::new(
            "projected-mean-symmetric",
            bad.is_empty(),
            if bad.is_empty() { format!("all within 3 stderr of 0 ({})", trend.join(", ")) } else { bad.join("; ") },
        ));
    } else if spec.require_monotone {
        let ok = done.len() == spec.n_list.len() && done.windows(2).all(|w| w[1].1 .0 >= w[0].1 .0);
        checks.push(Check::new("projected-mean-monotone", ok, trend.join(", ")));
    }
    if let (Some([lo, hi]), true) = (spec.band, h_norm > 0.0) {
        let top = per_n.last().copied().flatten();
        let ok = top.is_some_and(|a| a.0 >= lo && a.0 <= hi);
        checks.push(Check::new(
            "projected-mean-band",
            ok,
            match top {
                Some(a) => format!("N={}: {:.4} in [{lo}, {hi}]", spec.n_list.last().unwrap(), a.0),
                None => "largest N not completed".into(),
            },
        ));
    }
    if spec.sandwich_trend && h_norm > 0.0 {
        let ok = done.len() == spec.n_list.len()
            && done.windows(2).all(|w| {
                let (a, b) = (w[0].1, w[1].1);
                b.2 >= a.2 - spec.sandwich_slack * (a.3 * a.3 + b.3 * b.3).sqrt()
            });
        let text: Vec<String> = done.iter().map(|(n, a)| format!("N={n}: {:.3} ± {:.3}", a.2, a.3)).collect();
        checks.push(Check::new(
            "sandwich-frequency-nondecreasing",
            ok,
            format!("{} (slack {} stderr)", text.join(", "), spec.sandwich_slack),
        ));
    }
    let sandwich: Vec<serde_json::Value> = done
        .iter()
        .map(|(n, a)| json!({ "n": n, "frequency": num(a.2), "stderr": num(a.3) }))
        .collect();
    let means: Vec<serde_json::Value> =
        done.iter().map(|(n, a)| json!({ "n": n, "mean": num(a.0), "stderr": num(a.1) })).collect();
    let summary = json!({
        "direction": params.e_h().map(|e| e.coords().to_vec()),
        "betaE1": beta1.map(num),
        "betaE1Stderr": beta1_se.map(num),
        "betaStar": num(beta_star),
        "betaStarMethod": "isotropic |h| / beta(e1)",
        "supercritical": beta_star > 1.0,
        "lawOfLargeNumbersTarget": if h_norm > 0.0 { num(2.0) } else { num(0.0) },
        "projectedMean": means,
        "sandwich": { "epsilon": num(spec.epsilon), "byN": sandwich },
    });
    Ok(finish(Report::new(cfg, table, summary, checks), skipped))
}
