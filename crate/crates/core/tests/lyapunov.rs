use trapwalk_core::lattice::{Point, Site};
use trapwalk_core::lyapunov::*;
use trapwalk_core::polymer::PolymerWeight;

#[test]
fn exact_crossing_cells_inside_sandwich() {
    let w = PolymerWeight::unbiased(2, 0.5).unwrap();
    for dir in [Site::new(&[1, 0]), Site::new(&[1, 1]), Site::new(&[0, -1])] {
        for n in 1..=3 {
            let l1 = n * dir.l1() as usize;
            let est = crossing_probability(&w, &dir, n, CrossingMethod::ExactEnum { cap: l1 + 6 }, 0, 1).unwrap();
            let (lo, hi) = sandwich(2, 0.5, &Site::new(&[dir.get(0) * n as i32, dir.get(1) * n as i32]));
            let v = est.expectation.value;
            assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12), "{dir} n={n}: {lo} {v} {hi}");
        }
    }
}

/// For the neighbour target the lower sandwich is attained by the direct step
/// and every extra path only adds weight.
#[test]
fn neighbour_crossing_exceeds_direct_step() {
    let w = PolymerWeight::unbiased(2, 0.5).unwrap();
    let e = crossing_probability(&w, &Site::new(&[1, 0]), 1, CrossingMethod::ExactEnum { cap: 9 }, 0, 1).unwrap();
    assert!(e.expectation.value > 0.25 * 0.25);
}

#[test]
fn monte_carlo_cells_inside_sandwich() {
    let w = PolymerWeight::unbiased(2, 0.5).unwrap();
    for (k, m) in [CrossingMethod::TiltedIs { theta: None }, CrossingMethod::Splitting].into_iter().enumerate() {
        for n in [2, 5] {
            let est = crossing_probability(&w, &Site::new(&[1, 0]), n, m, 4000, 10 + k as u64).unwrap();
            assert!(est.within_sandwich(3.0), "{m:?} n={n}: {:?}", est.expectation);
        }
    }
}

#[test]
fn importance_sampling_agrees_with_enumeration() {
    let w = PolymerWeight::unbiased(2, 0.5).unwrap();
    let dir = Site::new(&[1, 0]);
    let exact = crossing_probability(&w, &dir, 2, CrossingMethod::ExactEnum { cap: 14 }, 20_000, 3).unwrap();
    let is = crossing_probability(&w, &dir, 2, CrossingMethod::TiltedIs { theta: None }, 40_000, 4).unwrap();
    let lost = exact.truncation_bound.unwrap();
    let (e, s) = (exact.expectation.value, is.expectation.stderr);
    assert!(is.expectation.value >= e - 3.0 * s && is.expectation.value <= e + lost + 3.0 * s);
}

#[test]
fn l1_model_dual_is_max_norm() {
    let m = NormModel::from_fn(2, 3.0, |u| 2.0 * u.l1());
    for h in [[0.3, 0.1], [-0.5, 0.5], [0.0, 1.2]] {
        let hp = Point::new(&h);
        let expect = h.iter().fold(0.0f64, |a, b| a.max(b.abs())) / 2.0;
        assert!((m.dual(&hp).value - expect).abs() < 1e-12);
    }
    assert_eq!(m.classify(&Point::new(&[1.0, 0.0])), Criticality::Subcritical);
    assert_eq!(m.classify(&Point::new(&[3.0, 0.0])), Criticality::Supercritical);
}

#[test]
fn distance_to_ball_along_axis() {
    let m = NormModel::from_fn(2, 3.0, |u| 1.7 * u.norm());
    let d = m.dist_beta_ball(&Point::new(&[3.0, 0.0]), &Point::zero(2), 2.0);
    assert!((d - m.beta(&Point::new(&[1.0, 0.0]))).abs() < 1e-6);
    assert_eq!(m.dist_beta_ball(&Point::new(&[1.0, 1.0]), &Point::zero(2), 2.0), 0.0);
}

#[test]
fn interpolated_gauge_is_homogeneous_and_subadditive() {
    let m = NormModel::from_fn(2, 3.0, |u| (u.get(0).powi(4) + u.get(1).powi(4)).powf(0.25) + 0.2 * u.l1());
    let a = Point::new(&[0.7, -0.2]);
    let b = Point::new(&[-0.1, 0.9]);
    assert!((m.beta(&a.scale(3.5)) - 3.5 * m.beta(&a)).abs() < 1e-9);
    assert!(m.beta(&a.add(&b)) <= m.beta(&a) + m.beta(&b) + 1e-9);
    assert!(m.triangle_violations(0.0).is_empty());
    assert!(m.symmetry_violations(0.0).is_empty());
}

#[test]
fn fitted_beta_in_trivial_bracket() {
    let w = PolymerWeight::unbiased(2, 0.5).unwrap();
    let fit = estimate_beta(&w, &Site::new(&[1, 0]), &[2, 4, 6, 8], CrossingMethod::TiltedIs { theta: None }, 4000, 9)
        .unwrap();
    assert!(fit.beta > 2f64.ln() && fit.beta < 8f64.ln(), "{}", fit.beta);
}
