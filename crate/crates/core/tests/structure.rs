use std::collections::BTreeSet;

use proptest::prelude::*;
use trapwalk_core::lattice::{BoxWindow, Grid, LatticeRegion, ModelParams, ObstacleField, Point, Site};
use trapwalk_core::lyapunov::NormModel;
use trapwalk_core::structure::*;
use trapwalk_core::walk::LatticePath;

/// Model with `rho_N` close to `target` at d = 2, p = 0.5.
fn params_with_rho(target: f64) -> ModelParams {
    let rho1 = ModelParams::new(2, 0.5, &[0.0, 0.0], 1).unwrap().rho1();
    let n = (target / rho1).powi(4).round() as u64;
    ModelParams::new(2, 0.5, &[0.0, 0.0], n).unwrap()
}

fn planted(rho: f64, center: Point, seed: u64) -> ObstacleField {
    ObstacleField::sample(BoxWindow::centered(2, (3.0 * rho) as i32), 0.5, seed)
        .unwrap()
        .with_planted_vacant_ball(center, rho)
}

proptest! {
    #[test]
    fn tiles_partition_the_window(m in 0i32..4, r in 0i32..12, cx in -5i32..5) {
        let cfg = CoarseGrainConfig { iota: 0.1, rho: 0.1, half_width: m };
        let w = BoxWindow::new(Site::new(&[cx - r, -r]), Site::new(&[cx + r, r + 1]));
        let tiles: Vec<Site> = cfg.tiles_meeting(&w).sites().collect();
        for s in w.sites() {
            let owners = tiles.iter().filter(|k| cfg.tile_window(k).contains(&s)).count();
            prop_assert_eq!(owners, 1);
        }
    }
}

#[test]
fn empty_set_grows_with_density_threshold() {
    let w = BoxWindow::centered(2, 20);
    for seed in 0..5 {
        let f = ObstacleField::sample(w, 0.6, seed).unwrap();
        let mut prev: BTreeSet<Site> = BTreeSet::new();
        for rho in [0.05, 0.1, 0.2, 0.4, 0.6] {
            let cfg = CoarseGrainConfig { iota: 0.2, rho, half_width: 2 };
            let e: BTreeSet<Site> = empty_box_set(&f, &cfg, &w).sites().collect();
            assert!(prev.is_subset(&e));
            prev = e;
        }
    }
}

#[test]
fn empty_set_tracks_planted_ball() {
    let rho = 40.0;
    let c = Point::new(&[3.3, -2.1]);
    let cfg = CoarseGrainConfig::new(0.05, 0.04, rho).unwrap();
    for seed in 0..10 {
        let f = planted(rho, c, seed);
        let e = empty_box_set(&f, &cfg, f.window());
        let ball = LatticeRegion::ball(c, rho).to_site_set();
        for k in e.tiles.keys() {
            let inside = cfg.tile_window(k).sites().all(|s| ball.contains(&s));
            assert!(!inside || e.tiles[k] == 0);
        }
        for k in cfg.tiles_meeting(f.window()).sites() {
            if cfg.tile_window(&k).sites().all(|s| ball.contains(&s)) {
                assert!(e.tiles.contains_key(&k), "tile {k} inside the ball is missing");
            }
        }
        let es: BTreeSet<Site> = e.sites().collect();
        let sym = ball.symmetric_difference(&es).count();
        assert!(sym as f64 <= 0.2 * ball.len() as f64, "seed {seed}: {sym} of {}", ball.len());
    }
}

#[test]
fn detector_recovers_planted_center() {
    let params = params_with_rho(10.0);
    let rho = params.rho_n();
    let cfg = DetectConfig::default();
    let c = Point::new(&[2.4, -3.7]);
    let mut hits = 0;
    for seed in 0..20 {
        let f = planted(rho, c, seed);
        let rep = detect_vacant_ball(&f, &params, None, &cfg).unwrap();
        assert_eq!(rep.obstacles_in_detected, 0);
        let recount = f
            .window()
            .grow(1)
            .sites()
            .filter(|s| (s.sub(&rep.center).norm_sq() as f64) < rep.radius * rep.radius && f.is_occupied(s))
            .count();
        assert_eq!(recount, 0);
        // the center is a lattice site, at most one unit from the planted one
        assert!(rep.radius >= rho - 1.0);
        if c.dist_sq_site(&rep.center).sqrt() <= cfg.iota * rho {
            hits += 1;
        }
    }
    assert!(hits >= 19, "{hits} of 20");
}

#[test]
fn detected_radius_monotone_in_planted_radius() {
    let params = params_with_rho(10.0);
    let c = Point::new(&[0.5, 0.0]);
    for seed in 0..5 {
        let base = ObstacleField::sample(BoxWindow::centered(2, 30), 0.5, seed).unwrap();
        let mut prev = 0.0;
        for r in [4.0, 6.0, 8.0, 10.0, 12.0] {
            let f = base.clone().with_planted_vacant_ball(c, r);
            let rep = detect_vacant_ball(&f, &params, None, &DetectConfig::default()).unwrap();
            assert!(rep.radius >= prev);
            prev = rep.radius;
        }
    }
}

#[test]
fn occupied_field_is_below_threshold() {
    let params = params_with_rho(10.0);
    let f = ObstacleField::sample(BoxWindow::centered(2, 20), 0.0, 0).unwrap();
    let rep = detect_vacant_ball(&f, &params, None, &DetectConfig::default()).unwrap();
    assert!(rep.below_threshold);
    assert!(rep.coarse_candidate.is_none());
}

#[test]
fn volume_cost_degenerate_cases() {
    let params = ModelParams::new(2, 0.9999, &[0.0, 0.0], 100).unwrap();
    let cfg = CoarseGrainConfig { iota: 0.1, rho: 0.04, half_width: 1 };
    let whole = cfg.tiled_window(2, 1).len();
    let rep = volume_cost_check(&params, &cfg, 1, whole, 2000, 1).unwrap();
    assert!(rep.hits > 1900);
    assert!(rep.bound > 0.0 && rep.consistent);
    let zero = volume_cost_check(&params, &cfg, 1, 0, 100, 1).unwrap();
    assert_eq!(zero.bound, 0.0);
    assert!(volume_cost_check(&params, &cfg, 1, 5, 10, 1).is_err());
}

#[test]
fn volume_cost_bound_holds_at_low_p() {
    let params = ModelParams::new(2, 0.3, &[0.0, 0.0], 100).unwrap();
    for m in [1, 2] {
        let cfg = CoarseGrainConfig { iota: 0.1, rho: 0.04, half_width: m };
        let tv = cfg.tile_volume(2);
        for k in 0..3 {
            let rep = volume_cost_check(&params, &cfg, 1, k * tv, 20_000, 7).unwrap();
            assert!(rep.consistent, "{rep:?}");
        }
    }
}

fn binomial_lower_tail(n: usize, p: f64, below: f64) -> f64 {
    let mut total = 0.0;
    let mut log_c = 0.0;
    for k in 0..n {
        if k as f64 >= below {
            break;
        }
        if k > 0 {
            log_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        total += (log_c + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp();
    }
    total
}

#[test]
fn density_scan_rarely_flags_dense_fields() {
    let w = BoxWindow::centered(2, 60);
    let f = ObstacleField::sample(w.grow(12), 0.5, 4).unwrap();
    let scan = density_dichotomy_scan(&f, &w, 10.0, 10.0, 0.1).unwrap();
    let ball = LatticeRegion::ball(Point::zero(2), 10.0).len();
    let per_obstacle = binomial_lower_tail(ball, 0.5, 0.1 * ball as f64);
    assert!(per_obstacle * (scan.obstacles_scanned as f64) < 1e-6);
    assert!(scan.flags.is_empty());
}

#[test]
fn density_scan_flags_isolated_obstacle() {
    let fw = BoxWindow::centered(2, 40);
    let mut g = Grid::new(fw, false);
    *g.get_mut(&Site::new(&[3, 1])).unwrap() = true;
    let f = ObstacleField::from_grid(g, 0.5, 0).unwrap();
    let scan = density_dichotomy_scan(&f, &BoxWindow::centered(2, 10), 2.0, 16.0, 0.01).unwrap();
    assert_eq!(scan.scales, vec![2.0, 4.0, 8.0, 16.0]);
    assert_eq!(scan.obstacles_scanned, 1);
    // |B(v, 8)| > 100, so the lone obstacle sits below 1% from l = 8 on.
    let flagged: Vec<f64> = scan.flags.iter().map(|fl| fl.l).collect();
    assert_eq!(flagged, vec![8.0, 16.0]);
}

/// Closed nearest-neighbour tour from `c` covering the square of half-side `r`.
fn raster_tour(c: Site, r: i32) -> Vec<Site> {
    let mut out = vec![c];
    let mut cur = c;
    let mut go = |to: Site, out: &mut Vec<Site>| {
        while cur != to {
            let d = to.sub(&cur);
            let axis = if d.get(0) != 0 { 0 } else { 1 };
            let mut next = cur;
            next.set(axis, cur.get(axis) + d.get(axis).signum());
            cur = next;
            out.push(cur);
        }
    };
    go(c.add(&Site::new(&[-r, -r])), &mut out);
    for (i, y) in (-r..=r).enumerate() {
        let xs = if i % 2 == 0 { (-r, r) } else { (r, -r) };
        go(c.add(&Site::new(&[xs.0, y])), &mut out);
        go(c.add(&Site::new(&[xs.1, y])), &mut out);
    }
    go(c, &mut out);
    out
}

fn synthetic_path(z: Site, n: usize, r: i32) -> LatticePath {
    let mut sites = vec![Site::origin(2)];
    let mut cur = Site::origin(2);
    while cur != z {
        cur = cur.step(if z.get(0) > cur.get(0) { 0 } else { 2 });
        sites.push(cur);
    }
    sites.extend(raster_tour(z, r).into_iter().skip(1));
    let side = z.add(&Site::new(&[0, 1]));
    while sites.len() < n + 1 {
        sites.push(side);
        sites.push(z);
    }
    assert_eq!(sites.len(), n + 1);
    LatticePath::from_sites(&sites).unwrap()
}

fn event_setup() -> (ModelParams, StructureConstants, NormModel, ObstacleField) {
    let params = ModelParams::new(2, 0.7, &[0.0, 0.0], 4096).unwrap();
    let c = StructureConstants { c_vacant: 3.0, ..Default::default() };
    let norm = NormModel::from_fn(2, 3.0, |u| 1.05 * u.norm());
    let field = ObstacleField::sample(BoxWindow::centered(2, 40), 1.0, 0).unwrap();
    (params, c, norm, field)
}

#[test]
fn synthetic_cover_satisfies_all_flags() {
    let (params, c, norm, field) = event_setup();
    let z = Site::new(&[12, 0]);
    let path = synthetic_path(z, 4096, 5);
    let rep = event_g(&field, &path, &params, &z, &z, &norm, &c);
    assert!(rep.radius_minus > 3.0);
    assert!(rep.holds, "{:?}", rep.reasons);
    assert!(rep.holds_prime, "{:?}", rep.reasons);
    assert_eq!(rep.tau_target, Some(4096));
    assert!(rep.t_out > 0.0);
    assert_eq!(rep.rxz, 0.0);
    assert!(rep.reasons.is_empty());
}

#[test]
fn path_missing_the_ball_reports_no_entry() {
    let (params, c, norm, field) = event_setup();
    let path = synthetic_path(Site::new(&[12, 0]), 4096, 5);
    let far = Site::new(&[-20, 20]);
    let rep = event_g(&field, &path, &params, &Site::new(&[12, 0]), &far, &norm, &c);
    assert!(!rep.confined_ok && !rep.holds);
    assert!(rep.reasons.iter().any(|r| r == "no-entry"));
}

#[test]
fn obstacle_in_ball_fails_vacancy() {
    let (params, c, norm, _) = event_setup();
    let mut g = Grid::new(BoxWindow::centered(2, 40), false);
    *g.get_mut(&Site::new(&[13, 2])).unwrap() = true;
    let field = ObstacleField::from_grid(g, 0.7, 0).unwrap();
    let z = Site::new(&[12, 0]);
    let path = synthetic_path(z, 4096, 5);
    let rep = event_g(&field, &path, &params, &z, &z, &norm, &c);
    assert!(!rep.vacant_ok && !rep.holds && !rep.confined_ok);
    assert!(rep.reasons.iter().any(|r| r == "obstacle-in-ball"));
    assert!(rep.reasons.iter().any(|r| r == "hit-obstacle"));
}

#[test]
fn strict_variant_implies_time_flag_when_consistent() {
    let (params, c, norm, field) = event_setup();
    let z = Site::new(&[12, 0]);
    let path = synthetic_path(z, 4096, 5);
    let rep = event_g(&field, &path, &params, &z, &z, &norm, &c);
    let eps_n = c.epsilon * 4096.0;
    if rep.holds_prime && 2.0 * eps_n <= rep.t_out {
        assert!(rep.time_ok);
    }
    assert!(rep.rz >= 0.0 && rep.rxz >= 0.0);
}

fn small_plus_report(params: &ModelParams, field: &ObstacleField) -> VacantBallReport {
    let cfg = DetectConfig { constants: StructureConstants { c_vacant: 6.0, c_outer: 400.0, ..Default::default() }, ..Default::default() };
    detect_vacant_ball(field, params, None, &cfg).unwrap()
}

#[test]
fn visits_of_a_path_inside_the_ball() {
    let params = ModelParams::new(2, 0.7, &[0.0, 0.0], 64).unwrap();
    let field = ObstacleField::sample(BoxWindow::centered(2, 6), 1.0, 0).unwrap();
    let rep = small_plus_report(&params, &field);
    assert_eq!(rep.center, Site::origin(2));
    let mut sites = vec![Site::origin(2)];
    for k in 0..64 {
        sites.push(if k % 2 == 0 { Site::new(&[1, 0]) } else { Site::origin(2) });
    }
    let path = LatticePath::from_sites(&sites).unwrap();
    let v = visit_statistics(&path, &params, &Site::origin(2), &rep, 0.3);
    assert_eq!(v.tau_minus, Some(0));
    assert_eq!(v.max_gap, Some(0));
    assert!(v.confined && v.target_hit);
    assert_eq!(v.fraction_outside, 0.0);
}

#[test]
fn excursion_breaks_confinement() {
    let params = ModelParams::new(2, 0.7, &[0.0, 0.0], 64).unwrap();
    let field = ObstacleField::sample(BoxWindow::centered(2, 6), 1.0, 0).unwrap();
    let rep = small_plus_report(&params, &field);
    let excursion = 12;
    let mut sites = vec![Site::origin(2)];
    for k in 1..=excursion / 2 {
        sites.push(Site::new(&[k, 0]));
    }
    for k in (0..excursion / 2).rev() {
        sites.push(Site::new(&[k, 0]));
    }
    while sites.len() < 65 {
        sites.push(Site::new(&[0, 1]));
        sites.push(Site::origin(2));
    }
    let path = LatticePath::from_sites(&sites).unwrap();
    let v = visit_statistics(&path, &params, &Site::origin(2), &rep, 0.3);
    let outside_plus = sites.iter().filter(|s| !rep.ball_plus().contains(s)).count();
    assert!(outside_plus > 0);
    assert!(!v.confined);
    let outside_minus = sites[..=excursion as usize].iter().filter(|s| !rep.ball_minus().contains(s)).count();
    assert!(v.max_gap.unwrap() >= outside_minus);
}
