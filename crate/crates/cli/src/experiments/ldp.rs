use serde_json::{json, Value};
use trapwalk_core::lattice::{Point, Site};
use trapwalk_core::lyapunov::NormModel;
use trapwalk_core::polymer::{GibbsConfig, GibbsSampler, PolymerWeight};
use trapwalk_core::rng::derive_seed;

use super::{beta_e1, finish, num, point_text, site_text, stream};
use crate::config::{ExperimentConfig, LdpSpec};
use crate::error::CliError;
use crate::report::{Check, Report, Table};
use crate::runner::{par_cells, Cancel};

/// Endpoint cells have side `max(1, rho_N / CELL_DIVISOR)` in the sup norm.
const CELL_DIVISOR: f64 = 8.0;
/// Radius of the zero-rate ball in units of `rho_N`.
const ZERO_RATE_RADIUS: f64 = 2.0;

struct CellOut {
    rho: f64,
    side: f64,
    /// Per target: the lattice target and the averaged cell mass.
    mass: Vec<(Site, f64)>,
    sweeps: usize,
}

/// Nearest site to `x` whose parity matches a walk of `n` steps.
fn reachable_site(x: &Point, n: u64) -> Site {
    let t = x.round();
    if (t.l1() as u64 + n) % 2 == 0 {
        return t;
    }
    let mut best: Option<(f64, Site)> = None;
    for k in 0..2 * x.dim() as u8 {
        let s = t.step(k);
        let dist = x.dist_sq_site(&s);
        if best.as_ref().map_or(true, |b| dist < b.0) {
            best = Some((dist, s));
        }
    }
    best.expect("dimension is positive").1
}

/// Indicator of the sup-norm cell of side `side` centered at `t`.
fn in_cell(y: &Site, t: &Site, side: f64) -> bool {
    y.sub(t).coords().iter().all(|&c| (c as f64).abs() <= side / 2.0)
}

fn run_cell(
    cfg: &ExperimentConfig,
    spec: &LdpSpec,
    n: u64,
    targets: &[Point],
    seed: u64,
    cancel: &Cancel,
) -> Result<Option<CellOut>, CliError> {
    let params = cfg.model.params_at(n)?;
    let d = params.d();
    let rho = params.rho_n();
    let w = PolymerWeight::unbiased(d, params.p())?;
    let mut gc = GibbsConfig::new((spec.chain.window_factor * rho).ceil() as i32);
    gc.shift_range = ((spec.chain.shift_range_factor * rho).round() as i32).max(1);
    let mut g = GibbsSampler::new(&w, n as usize, gc, seed)?;
    let side = (rho / CELL_DIVISOR).max(1.0);
    let lattice: Vec<Site> = targets.iter().map(|x| reachable_site(&x.scale(rho), n)).collect();
    let mut mass = vec![0.0; targets.len()];
    let burn = (spec.chain.burn_in_fraction * spec.sweeps as f64).floor() as u64;
    let mut kept = 0usize;
    for s in 0..spec.sweeps {
        if cancel.is_cancelled() {
            return Ok(None);
        }
        g.sweep()?;
        if s < burn {
            continue;
        }
        kept += 1;
        // The endpoint law given the field is exact, so deep cells still get
        // positive mass from every sweep.
        for (site, v) in g.endpoint_law() {
            for (k, t) in lattice.iter().enumerate() {
                if in_cell(&site, t, side) {
                    mass[k] += v;
                }
            }
        }
    }
    if kept == 0 {
        return Err(CliError::Config("ldp: no sweeps left after burn-in".into()));
    }
    Ok(Some(CellOut {
        rho,
        side,
        mass: lattice.into_iter().zip(mass.into_iter().map(|m| m / kept as f64)).collect(),
        sweeps: kept,
    }))
}

/// Endpoint large deviations at scale `rho_N`: measured `-log mu_N(cell)`
/// against `dist_beta(x, B(0; 2)) rho_N`.
pub(super) fn run(cfg: &ExperimentConfig, spec: &LdpSpec, cancel: &Cancel) -> Result<Report, CliError> {
    let params = cfg.model.params()?;
    let d = params.d();
    if params.h().norm() != 0.0 {
        return Err(CliError::Config("ldp: the rate comparison is for the unbiased measure; set drift to 0".into()));
    }
    if spec.n_list.is_empty() || spec.n_list.windows(2).any(|w| w[0] >= w[1]) || spec.n_list[0] == 0 {
        return Err(CliError::Config("ldp: nList must be positive and increasing".into()));
    }
    let mut targets = Vec::new();
    for t in &spec.targets {
        if t.len() != d {
            return Err(CliError::Config(format!("ldp: target {t:?} must have {d} coordinates")));
        }
        targets.push(Point::new(t));
    }
    let (b1, b1_se) = beta_e1(spec.beta_e1, d, params.p(), cfg.samples, derive_seed(cfg.seed, stream::BETA))?;
    let model = NormModel::from_fn(d, 3.0, |u| b1 * u.norm());
    let zero = Point::zero(d);
    let unit_rates: Vec<f64> = targets.iter().map(|x| model.dist_beta_ball(x, &zero, ZERO_RATE_RADIUS)).collect();

    let cells: Vec<(usize, u64)> =
        (0..spec.n_list.len()).flat_map(|k| (0..cfg.replicas).map(move |r| (k, r))).collect();
    let results = par_cells(&cells, cancel, |i, &(k, _)| {
        let seed = derive_seed(cfg.seed, stream::CELL + i as u64);
        run_cell(cfg, spec, spec.n_list[k], &targets, seed, cancel)
    })?;

    let mut table = Table::new(&[
        "n", "replica", "rhoN", "cellSide", "target", "latticeTarget", "cellMass", "measuredRate", "predictedRate",
        "ratio", "measuredOverRho", "oneSided",
    ]);
    let mut skipped = 0;
    // (N index, target index) -> measured rates over replicas.
    let mut rates: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); targets.len()]; spec.n_list.len()];
    let mut rhos = vec![f64::NAN; spec.n_list.len()];
    for (&(k, r), out) in cells.iter().zip(&results) {
        let Some(Some(c)) = out else {
            skipped += 1;
            continue;
        };
        rhos[k] = c.rho;
        for (j, (site, m)) in c.mass.iter().enumerate() {
            let predicted = unit_rates[j] * c.rho;
            let one_sided = *m <= 0.0;
            // With zero mass only a lower bound from the sweep count is known.
            let measured = if one_sided { (c.sweeps as f64).ln() } else { -m.ln() };
            rates[k][j].push(measured);
            table.push(vec![
                json!(spec.n_list[k]),
                json!(r),
                num(c.rho),
                num(c.side),
                point_text(&targets[j]),
                site_text(site),
                num(*m),
                num(measured),
                num(predicted),
                if predicted > 0.0 { num(measured / predicted) } else { Value::Null },
                num(measured / c.rho),
                json!(one_sided),
            ]);
        }
    }

    let mut checks = Vec::new();
    let mut trend = Vec::new();
    for (j, x) in targets.iter().enumerate() {
        let per_n: Vec<Option<f64>> = rates
            .iter()
            .map(|rs| (rs[j].len() as u64 == cfg.replicas).then(|| rs[j].iter().sum::<f64>() / rs[j].len() as f64))
            .collect();
        let label = point_text(x).as_str().unwrap_or_default().to_string();
        if unit_rates[j] == 0.0 {
            let scaled: Vec<f64> = per_n.iter().zip(&rhos).filter_map(|(m, r)| m.map(|m| m / r)).collect();
            let ok = scaled.len() == spec.n_list.len() && scaled.windows(2).all(|w| w[1] <= w[0]);
            checks.push(Check::new(
                format!("zero-rate-trend-{label}"),
                ok,
                format!("measured rate / rho_N by N: {scaled:?}"),
            ));
            trend.push(json!({ "target": label, "measuredOverRho": scaled }));
        } else {
            let ratios: Vec<f64> =
                per_n.iter().zip(&rhos).filter_map(|(m, r)| m.map(|m| m / (unit_rates[j] * r))).collect();
            if let Some([lo, hi]) = spec.ratio_band {
                let top = per_n.last().copied().flatten().map(|m| m / (unit_rates[j] * rhos[rhos.len() - 1]));
                checks.push(Check::new(
                    format!("rate-ratio-band-{label}"),
                    top.is_some_and(|r| r >= lo && r <= hi),
                    format!("measured/predicted by N: {ratios:?}; band [{lo}, {hi}] at N={}", spec.n_list.last().unwrap()),
                ));
            }
            trend.push(json!({ "target": label, "ratio": ratios }));
        }
    }
    let summary = json!({
        "betaE1": num(b1),
        "betaE1Stderr": b1_se.map(num),
        "normModel": "isotropic beta(e1) |x|",
        "cellSide": format!("max(1, rhoN / {CELL_DIVISOR})"),
        "zeroRateRadius": num(ZERO_RATE_RADIUS),
        "trend": trend,
    });
    Ok(finish(Report::new(cfg, table, summary, checks), skipped))
}
