use rand::Rng as _;
use serde_json::json;
use trapwalk_core::lattice::{compute_rho1_and_cdp, continuum_lambda, unit_ball_volume, BoxWindow, LatticeRegion};
use trapwalk_core::lattice::{ObstacleField, Point, Site};
use trapwalk_core::lyapunov::{crossing_probability, CrossingMethod};
use trapwalk_core::polymer::{exact_distribution, for_each_path, McmcConfig, McmcVariant, PathMcmc};
use trapwalk_core::polymer::{PolymerWeight, Variant};
use trapwalk_core::rng::{derive_seed, rng_from};
use trapwalk_core::spectral::{log_killed_heat_kernel, log_survival_indexed, principal_eigen};
use trapwalk_core::spectral::{principal_eigen_indexed, IndexedDomain, DEFAULT_TOL};
use trapwalk_core::stats::total_variation;
use trapwalk_core::structure::{detect_vacant_ball, CoarseGrainConfig, DetectConfig};
use trapwalk_core::walk::LatticePath;
use trapwalk_core::ModelParams;

use super::{finish, stream};
use crate::config::{ExperimentConfig, SuitesSpec};
use crate::error::CliError;
use crate::report::{Check, Report, Table};
use crate::runner::{par_cells, Cancel};

const MAX_DOMAIN_SITES: usize = 400;
const MAX_TAIL_N: usize = 2000;
const MCMC_SAMPLES: u64 = 200_000;
const MCMC_TV: f64 = 0.02;

#[derive(Clone, Copy, Debug)]
enum Suite {
    PartitionOracle,
    SmallDomainEigen,
    BallContinuum,
    ExitTail,
    HeatKernelDecay,
    CrossingSandwich,
    RadiusConstants,
    McmcOracle,
    PinnedInclusion,
    Tiling,
    DetectorSoundness,
    Determinism,
}

const ALL: [Suite; 12] = [
    Suite::PartitionOracle,
    Suite::SmallDomainEigen,
    Suite::BallContinuum,
    Suite::ExitTail,
    Suite::HeatKernelDecay,
    Suite::CrossingSandwich,
    Suite::RadiusConstants,
    Suite::McmcOracle,
    Suite::PinnedInclusion,
    Suite::Tiling,
    Suite::DetectorSoundness,
    Suite::Determinism,
];

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::PartitionOracle => "partition-oracle",
            Suite::SmallDomainEigen => "small-domain-eigen",
            Suite::BallContinuum => "ball-continuum",
            Suite::ExitTail => "exit-tail-inequality",
            Suite::HeatKernelDecay => "heat-kernel-decay",
            Suite::CrossingSandwich => "crossing-sandwich",
            Suite::RadiusConstants => "radius-constants",
            Suite::McmcOracle => "mcmc-vs-enumeration",
            Suite::PinnedInclusion => "pinned-inside-hitting",
            Suite::Tiling => "tiling-exact",
            Suite::DetectorSoundness => "detector-soundness",
            Suite::Determinism => "determinism",
        }
    }
}

type Outcome = (bool, String);

fn fail_list(bad: Vec<String>, ok_text: String) -> Outcome {
    if bad.is_empty() {
        (true, ok_text)
    } else {
        (false, bad.into_iter().take(20).collect::<Vec<_>>().join("; "))
    }
}

fn partition_oracle(p: f64) -> Result<Outcome, CliError> {
    let mut bad = Vec::new();
    for q in [0.5, p] {
        let z = exact_distribution(&PolymerWeight::unbiased(2, q)?, 2, Variant::Tilted, None)?.partition;
        let want = (4.0 * q * q + 12.0 * q * q * q) / 16.0;
        if (z - want).abs() > 4.0 * f64::EPSILON {
            bad.push(format!("p={q}: Z_2 = {z} vs {want}"));
        }
    }
    Ok(fail_list(bad, "Z_2(p) = (4p^2 + 12p^3) / 16 at p = 1/2 and the model p".into()))
}

fn small_domain_eigen(tol: f64) -> Result<Outcome, CliError> {
    let mut bad = Vec::new();
    for d in 1..=4 {
        let one = principal_eigen(&LatticeRegion::from_sites([Site::origin(d)]), tol)?.lambda;
        let two = principal_eigen(&LatticeRegion::from_sites([Site::origin(d), Site::unit(d, 0)]), tol)?.lambda;
        let want = 1.0 - 1.0 / (2 * d) as f64;
        if (one - 1.0).abs() > 1e-12 {
            bad.push(format!("d={d}: single site {one}"));
        }
        if (two - want).abs() > 1e-12 {
            bad.push(format!("d={d}: adjacent pair {two} vs {want}"));
        }
    }
    Ok(fail_list(bad, "single site 1, adjacent pair 1 - 1/(2d) for d = 1..4".into()))
}

fn ball_continuum(tol: f64) -> Result<Outcome, CliError> {
    let r = 20.0;
    let l = principal_eigen(&LatticeRegion::ball_at_origin(2, r), tol)?.lambda;
    let want = continuum_lambda(2) / (r * r);
    let rel = (l / want - 1.0).abs();
    Ok((rel <= 0.05, format!("d=2 R=20: {l} vs {want} (relative {rel:.4})")))
}

/// Random subset of a box; the suite seeds are listed on failure.
fn random_domain(seed: u64) -> Vec<Site> {
    let mut rng = rng_from(seed);
    let d = rng.gen_range(2..=3);
    let half = if d == 2 { 12 } else { 4 };
    let keep: f64 = rng.gen_range(0.3..0.95);
    let mut out: Vec<Site> = BoxWindow::centered(d, half).sites().filter(|_| rng.gen::<f64>() < keep).collect();
    out.truncate(MAX_DOMAIN_SITES);
    if out.is_empty() {
        out.push(Site::origin(d));
    }
    out
}

fn exit_tail(count: u64, seed: u64, tol: f64) -> Result<Outcome, CliError> {
    let mut bad = Vec::new();
    for k in 0..count {
        let s = derive_seed(seed, k);
        let sites = random_domain(s);
        let dom = IndexedDomain::new(sites.iter().copied())?;
        let lambda = principal_eigen_indexed(&dom, tol)?.lambda;
        let mut rng = rng_from(derive_seed(s, 1));
        let x = sites[rng.gen_range(0..sites.len())];
        let n = rng.gen_range(0..=MAX_TAIL_N);
        let lhs = log_survival_indexed(&dom, &x, n)?;
        let mut rhs = 0.5 * (dom.len() as f64).ln();
        if n > 0 {
            rhs += n as f64 * (1.0 - lambda).ln();
        }
        // Slack for the eigenvalue tolerance, compounded over n steps.
        let slack = 1e-9 + n as f64 * tol;
        if !(lhs <= rhs + slack) {
            bad.push(format!("domain seed {s} (|U|={}) x=({x}) n={n}: {lhs} > {rhs}", dom.len()));
        }
    }
    Ok(fail_list(bad, format!("{count} random domains, zero violations")))
}

fn heat_kernel_decay(tol: f64) -> Result<Outcome, CliError> {
    let ball = LatticeRegion::ball_at_origin(2, 8.0);
    let o = Site::origin(2);
    let n = 5000;
    let lambda = principal_eigen(&ball, tol)?.lambda;
    let rate = -log_killed_heat_kernel(&ball, &o, &o, n)? / n as f64;
    let err = (rate + (1.0 - lambda).ln()).abs();
    Ok((err <= 1e-3, format!("R=8 n={n} eigen tol {tol:e}: error {err:e} (allowed 1e-3)")))
}

fn crossing_sandwich(p: f64) -> Result<Outcome, CliError> {
    let w = PolymerWeight::unbiased(2, p)?;
    let mut bad = Vec::new();
    let mut cells = 0;
    for v in [Site::new(&[1, 0]), Site::new(&[1, 1]), Site::new(&[0, -1])] {
        for n in 1..=2usize {
            let l1 = n * v.l1() as usize;
            let e = crossing_probability(&w, &v, n, CrossingMethod::ExactEnum { cap: l1 + 6 }, 0, 0)?;
            cells += 1;
            if !e.within_sandwich(0.0) {
                bad.push(format!("v=({v}) n={n}: {} not in [{}, {}]", e.expectation.value, e.lower, e.upper));
            }
        }
    }
    Ok(fail_list(bad, format!("{cells} exact cells inside the sandwich")))
}

/// Golden-section minimum of `lambda / r^2 + omega_d r^d log(1/p)`.
fn dv_minimize(d: usize, p: f64) -> (f64, f64) {
    let lam = continuum_lambda(d);
    let om = unit_ball_volume(d);
    let l = (1.0 / p).ln();
    let f = |r: f64| lam / (r * r) + om * r.powi(d as i32) * l;
    let (mut a, mut b) = (1e-3, 50.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let e = a + g * (b - a);
        if f(c) < f(e) {
            b = e;
        } else {
            a = c;
        }
    }
    let r = 0.5 * (a + b);
    (r, f(r))
}

fn radius_constants(p: f64) -> Result<Outcome, CliError> {
    let mut bad = Vec::new();
    for (d, q) in [(2, 0.5), (2, p), (3, 0.5)] {
        let c = compute_rho1_and_cdp(d, q)?;
        let (r, v) = dv_minimize(d, q);
        if (c.rho1 - r).abs() > 1e-6 || (c.cdp - v).abs() > 1e-6 {
            bad.push(format!("d={d} p={q}: ({}, {}) vs ({r}, {v})", c.rho1, c.cdp));
        }
    }
    Ok(fail_list(bad, "closed form matches golden-section minimization to 1e-6".into()))
}

fn mcmc_oracle(params: &ModelParams, seed: u64) -> Result<Outcome, CliError> {
    let w = PolymerWeight::new(2, params.p(), &[0.2, 0.0])?;
    let n = 6;
    let exact = exact_distribution(&w, n, Variant::Tilted, None)?;
    let mut chain = PathMcmc::new(w, n, McmcVariant::Tilted, McmcConfig::default(), seed)?;
    let mut counts = std::collections::BTreeMap::new();
    chain.sample(10_000, MCMC_SAMPLES, 2, |c| *counts.entry(c.endpoint()).or_insert(0u64) += 1);
    let law: Vec<(Site, f64)> = counts.into_iter().map(|(s, c)| (s, c as f64 / MCMC_SAMPLES as f64)).collect();
    let tv = total_variation(&law, &exact.endpoint);
    Ok((tv <= MCMC_TV, format!("N={n} p={} h=(0.2,0) seed {seed}: TV {tv:.4} (allowed {MCMC_TV})", params.p())))
}

fn pinned_inclusion(p: f64, seed: u64) -> Result<Outcome, CliError> {
    let w = PolymerWeight::unbiased(2, p)?;
    let n = 6;
    let window = BoxWindow::centered(2, n as i32 + 1);
    let mut bad = Vec::new();
    let mut checked = 0u64;
    for x in [Site::new(&[0, 0]), Site::new(&[2, 0]), Site::new(&[1, 1])] {
        for f in 0..5 {
            let fs = derive_seed(seed, f);
            let field = ObstacleField::sample(window, p, fs)?;
            for_each_path(&w, n, Variant::Pinned { x }, |leaf| {
                let path = LatticePath::from_sites(leaf.positions).expect("enumerated paths are connected");
                let rec = path.hitting_record(Some(&field), Some(x), n, None);
                if rec.survives_past(n) {
                    checked += 1;
                    if !rec.tau_target_after_n.is_some_and(|t| rec.survives_past(t)) {
                        bad.push(format!("x=({x}) field seed {fs}: {}", path.to_compact()));
                    }
                }
            })?;
        }
    }
    Ok(fail_list(bad, format!("{checked} surviving pinned paths, zero violations")))
}

fn tiling() -> Result<Outcome, CliError> {
    let mut bad = Vec::new();
    for m in 0..4 {
        let cfg = CoarseGrainConfig { iota: 0.1, rho: 0.1, half_width: m };
        for (lo, hi) in [([-7, -3], [5, 9]), ([0, 0], [0, 0]), ([-2, 4], [11, 4])] {
            let w = BoxWindow::new(Site::new(&lo), Site::new(&hi));
            let tiles: Vec<Site> = cfg.tiles_meeting(&w).sites().collect();
            for s in w.sites() {
                let owners = tiles.iter().filter(|k| cfg.tile_window(k).contains(&s)).count();
                if owners != 1 {
                    bad.push(format!("m={m} window {lo:?}..{hi:?}: site ({s}) in {owners} tiles"));
                }
            }
        }
    }
    Ok(fail_list(bad, "every window site lies in exactly one tile".into()))
}

fn detector_soundness(seed: u64) -> Result<Outcome, CliError> {
    let base = ModelParams::new(2, 0.5, &[0.0, 0.0], 1)?;
    let n = (10.0 / base.rho1()).powi(4).round() as u64;
    let params = base.with_n(n)?;
    let rho = params.rho_n();
    let center = Point::new(&[1.3, -2.2]);
    let cfg = DetectConfig::default();
    let mut bad = Vec::new();
    for k in 0..10 {
        let fs = derive_seed(seed, k);
        let field = ObstacleField::sample(BoxWindow::centered(2, (3.0 * rho) as i32), 0.5, fs)?
            .with_planted_vacant_ball(center.clone(), rho);
        let r = detect_vacant_ball(&field, &params, None, &cfg)?;
        let dirty = super::detect::recount_open_ball(&field, &r.center, r.radius);
        let err = center.dist_sq_site(&r.center).sqrt();
        if dirty > 0 || err > cfg.iota * rho {
            bad.push(format!("field seed {fs}: {dirty} obstacles, center error {err:.2}"));
        }
    }
    Ok(fail_list(bad, "10 planted balls recovered, reported balls obstacle-free".into()))
}

fn determinism(p: f64, seed: u64) -> Result<Outcome, CliError> {
    let w = PolymerWeight::new(2, p, &[0.1, 0.0])?;
    let draw = || -> Result<Vec<Site>, CliError> {
        let mut c = PathMcmc::new(w.clone(), 20, McmcVariant::Tilted, McmcConfig::default(), seed)?;
        let mut v = Vec::new();
        c.sample(100, 200, 1, |c| v.push(c.endpoint()));
        Ok(v)
    };
    let same = draw()? == draw()?;
    Ok((same, format!("two chains with seed {seed} agree: {same}")))
}

/// Every exact-inequality and oracle-equivalence check in one pass/fail ledger.
pub(super) fn run(cfg: &ExperimentConfig, spec: &SuitesSpec, cancel: &Cancel) -> Result<Report, CliError> {
    let params = cfg.model.params()?;
    let p = params.p();
    if !(spec.eigen_tol > 0.0) {
        return Err(CliError::Config("suites: eigenTol must be positive".into()));
    }
    let results = par_cells(&ALL, cancel, |i, s| {
        let seed = derive_seed(cfg.seed, stream::CELL + i as u64);
        match s {
            Suite::PartitionOracle => partition_oracle(p),
            Suite::SmallDomainEigen => small_domain_eigen(DEFAULT_TOL),
            Suite::BallContinuum => ball_continuum(DEFAULT_TOL),
            Suite::ExitTail => exit_tail(spec.random_domains, seed, DEFAULT_TOL),
            Suite::HeatKernelDecay => heat_kernel_decay(spec.eigen_tol),
            Suite::CrossingSandwich => crossing_sandwich(p),
            Suite::RadiusConstants => radius_constants(p),
            Suite::McmcOracle => mcmc_oracle(&params, seed),
            Suite::PinnedInclusion => pinned_inclusion(p, seed),
            Suite::Tiling => tiling(),
            Suite::DetectorSoundness => detector_soundness(seed),
            Suite::Determinism => determinism(p, seed),
        }
    })?;
    let mut table = Table::new(&["suite", "passed", "detail"]);
    let mut checks = Vec::new();
    let mut skipped = 0;
    for (s, r) in ALL.iter().zip(results) {
        let Some((ok, detail)) = r else {
            skipped += 1;
            continue;
        };
        table.push(vec![json!(s.name()), json!(ok), json!(detail)]);
        checks.push(Check::new(s.name(), ok, detail));
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let summary = json!({ "suites": ALL.len(), "passed": passed });
    Ok(finish(Report::new(cfg, table, summary, checks), skipped))
}
