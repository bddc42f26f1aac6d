use trapwalk_core::lattice::{BoxWindow, ObstacleField, Point, Site};
use trapwalk_core::polymer::*;
use trapwalk_core::rng::{derive_seed, rng_from};
use trapwalk_core::stats::{total_variation, MeanVar};
use trapwalk_core::walk::LatticePath;

fn mcmc_endpoint_law(w: &PolymerWeight, n: usize, samples: u64, seed: u64) -> Vec<(Site, f64)> {
    let mut chain = PathMcmc::new(w.clone(), n, McmcVariant::Tilted, McmcConfig::default(), seed).unwrap();
    let mut counts = std::collections::BTreeMap::new();
    chain.sample(10_000, samples, 2, |c| *counts.entry(c.endpoint()).or_insert(0u64) += 1);
    counts.into_iter().map(|(s, c)| (s, c as f64 / samples as f64)).collect()
}

#[test]
fn two_step_partition_closed_form() {
    for p in [0.1, 0.5, 0.77] {
        let w = PolymerWeight::unbiased(2, p).unwrap();
        let e = exact_distribution(&w, 2, Variant::Tilted, None).unwrap();
        assert!((e.partition - (4.0 * p * p + 12.0 * p * p * p) / 16.0).abs() < 1e-15);
    }
    let w = PolymerWeight::unbiased(2, 0.5).unwrap();
    let z = exact_distribution(&w, 2, Variant::Tilted, None).unwrap().partition;
    assert!((z - 5.0 / 32.0).abs() <= 4.0 * f64::EPSILON);
}

#[test]
fn mcmc_matches_enumeration_tilted() {
    let w = PolymerWeight::new(2, 0.5, &[0.2, 0.0]).unwrap();
    let exact = exact_distribution(&w, 6, Variant::Tilted, None).unwrap();
    let law = mcmc_endpoint_law(&w, 6, 300_000, 7);
    let tv = total_variation(&law, &exact.endpoint);
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn mcmc_matches_enumeration_pinned_range() {
    let w = PolymerWeight::unbiased(2, 0.6).unwrap();
    let x = Site::new(&[2, 0]);
    let exact = exact_distribution(&w, 6, Variant::Pinned { x }, None).unwrap();
    let mut chain = PathMcmc::new(w, 6, McmcVariant::Pinned { x }, McmcConfig::default(), 3).unwrap();
    let mut counts = std::collections::BTreeMap::new();
    let samples = 200_000;
    chain.sample(5_000, samples, 2, |c| {
        assert_eq!(c.endpoint(), x);
        *counts.entry(c.range_size()).or_insert(0u64) += 1;
    });
    let law: Vec<(usize, f64)> = counts.into_iter().map(|(k, c)| (k, c as f64 / samples as f64)).collect();
    let tv = total_variation(&law, &exact.range);
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn gibbs_matches_enumeration_unbiased() {
    let w = PolymerWeight::unbiased(2, 0.7).unwrap();
    let n = 6;
    let exact = exact_distribution(&w, n, Variant::Tilted, None).unwrap();
    let mut g = GibbsSampler::new(&w, n, GibbsConfig::new(n as i32 + 1), 5).unwrap();
    let mut acc = std::collections::BTreeMap::new();
    let sweeps = 40_000;
    for _ in 0..sweeps {
        g.sweep().unwrap();
        *acc.entry(g.endpoint()).or_insert(0.0) += 1.0 / sweeps as f64;
    }
    let law: Vec<(Site, f64)> = acc.into_iter().collect();
    let tv = total_variation(&law, &exact.endpoint);
    assert!(tv < 0.02, "tv {tv}");
}

/// Averaging the quenched survival indicator over fresh fields recovers the
/// annealed weight `E[p^{range}]`.
#[test]
fn obstacle_average_matches_annealed_weight() {
    let p = 0.8;
    let n = 6;
    let w = PolymerWeight::unbiased(2, p).unwrap();
    let exact = exact_distribution(&w, n, Variant::Tilted, None).unwrap().partition;
    let mut rng = rng_from(11);
    let mut mv = MeanVar::default();
    let window = BoxWindow::centered(2, n as i32 + 1);
    for i in 0..60_000u64 {
        let path = LatticePath::simulate(Site::origin(2), n, &mut rng);
        let field = ObstacleField::sample(window, p, derive_seed(99, i)).unwrap();
        mv.push(if path.obstacle_time(&field).is_none() { 1.0 } else { 0.0 });
    }
    assert!((mv.mean - exact).abs() < 3.5 * mv.stderr(), "{} vs {exact}", mv.mean);
}

#[test]
fn survival_estimators_agree_with_enumeration() {
    let w = PolymerWeight::unbiased(2, 0.5).unwrap();
    let exact = exact_distribution(&w, 8, Variant::Tilted, None).unwrap().partition;
    for m in [SurvivalMethod::Plain, SurvivalMethod::Tilted { theta: None }] {
        let e = annealed_survival_estimate(&w, 8, m, 100_000, 4).unwrap();
        assert!((e.value - exact).abs() < 3.5 * e.stderr, "{m:?}: {} vs {exact}", e.value);
    }
}

/// `{S_N = x, tau_O > N}` is contained in `{tau_O > tau_x^N}` for every path.
#[test]
fn pinned_event_inside_hitting_event() {
    let w = PolymerWeight::unbiased(2, 0.5).unwrap();
    let n = 6;
    let x = Site::new(&[2, 0]);
    let window = BoxWindow::centered(2, n as i32 + 1);
    for seed in 0..20 {
        let field = ObstacleField::sample(window, 0.7, seed).unwrap();
        for_each_path(&w, n, Variant::Pinned { x }, |leaf| {
            let path = LatticePath::from_sites(leaf.positions).unwrap();
            let rec = path.hitting_record(Some(&field), Some(x), n, None);
            if rec.survives_past(n) {
                let t = rec.tau_target_after_n.unwrap();
                assert!(rec.survives_past(t));
            }
        })
        .unwrap();
    }
}

#[test]
fn gibbs_drift_in_free_window() {
    // With p = 1 the window walls are the only obstacles. The direct endpoint
    // mean is exact; the translation average is biased by starts near the
    // walls, and the bias shrinks as the window grows.
    let h = 0.3f64;
    let n = 16;
    let w = PolymerWeight::new(2, 1.0, &[h, 0.0]).unwrap();
    let exact = n as f64 * h.sinh() / (h.cosh() + 1.0);
    let mut errs = Vec::new();
    for hw in [40, 160] {
        let mut g = GibbsSampler::new(&w, n, GibbsConfig::new(hw), 1).unwrap();
        g.sweep().unwrap();
        let direct = g.endpoint_expectation(|s| s.get(0) as f64);
        assert!((direct - exact).abs() < 1e-6, "{direct} vs {exact}");
        let rb = g.translation_averaged_drift(&Point::new(&[1.0, 0.0]));
        errs.push((rb - exact).abs() / exact);
    }
    assert!(errs[1] < errs[0] / 2.0 && errs[1] < 0.01, "{errs:?}");
}
