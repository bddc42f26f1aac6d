use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{continuum_lambda, unit_ball_volume, BoxWindow, LatticeRegion, Site};
use crate::spectral::eigen::{principal_eigen_indexed, SpectralPair, DEFAULT_TOL};
use crate::spectral::domain::IndexedDomain;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FaberKrahnReport {
    pub volume: usize,
    pub lambda: f64,
    /// `|U|^{2/d} lambda_U - lambda_B`, with `lambda_B` the eigenvalue of the unit-volume ball.
    pub deficit: f64,
    /// `min |B' symdiff U| / |B'|` over lattice balls of matched volume.
    pub asymmetry: f64,
    pub best_center: Site,
    pub matched_volume: usize,
}

/// Eigenvalue of the continuum ball of unit volume.
pub fn unit_volume_ball_lambda(d: usize) -> f64 {
    continuum_lambda(d) * unit_ball_volume(d).powf(2.0 / d as f64)
}

pub fn faber_krahn_report(domain: &LatticeRegion) -> Result<FaberKrahnReport> {
    let dom = IndexedDomain::from_region(domain)?;
    let lambda = principal_eigen_indexed(&dom, DEFAULT_TOL)?.lambda;
    let d = dom.dim();
    let vol = dom.len();
    let deficit = (vol as f64).powf(2.0 / d as f64) * lambda - unit_volume_ball_lambda(d);
    let set: BTreeSet<Site> = dom.sites().iter().copied().collect();

    let mut bary = vec![0.0; d];
    for s in dom.sites() {
        for (i, b) in bary.iter_mut().enumerate() {
            *b += s.get(i) as f64;
        }
    }
    let bary: Vec<i32> = bary.iter().map(|b| (b / vol as f64).round() as i32).collect();
    let centers = BoxWindow::new(
        Site::new(&bary.iter().map(|b| b - 2).collect::<Vec<_>>()),
        Site::new(&bary.iter().map(|b| b + 2).collect::<Vec<_>>()),
    );

    let r_guess = (vol as f64 / unit_ball_volume(d)).powf(1.0 / d as f64);
    let reach = (1.5 * r_guess).ceil() as i32 + 2;
    // Squared distances of lattice points in a large cube, sorted, give every
    // lattice-ball volume around a lattice center.
    let mut d2: Vec<i64> = BoxWindow::centered(d, reach).sites().map(|s| s.norm_sq()).collect();
    d2.sort_unstable();
    let mut best_k = 0i64;
    let mut best_gap = usize::MAX;
    let mut idx = 0;
    while idx < d2.len() {
        let k = d2[idx];
        let mut j = idx;
        while j < d2.len() && d2[j] == k {
            j += 1;
        }
        let gap = j.abs_diff(vol);
        if gap < best_gap {
            best_gap = gap;
            best_k = k;
        }
        idx = j;
    }
    let radius = (best_k as f64).sqrt();

    let mut best = (f64::INFINITY, Site::origin(d), 0usize);
    for c in centers.sites() {
        let ball = LatticeRegion::ball(c.to_point(), radius).sites();
        let inter = ball.iter().filter(|s| set.contains(s)).count();
        let sym = ball.len() + vol - 2 * inter;
        let a = sym as f64 / ball.len() as f64;
        if a < best.0 {
            best = (a, c, ball.len());
        }
    }
    Ok(FaberKrahnReport {
        volume: vol,
        lambda,
        deficit,
        asymmetry: best.0,
        best_center: best.1,
        matched_volume: best.2,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelSetReport {
    pub eta: f64,
    pub esize: usize,
    pub omega: Vec<Site>,
    pub omega_eta2: Vec<Site>,
    pub omega_plus: Vec<Site>,
    pub lambda_full: f64,
    pub lambda_omega: Option<f64>,
    pub lambda_omega_eta2: Option<f64>,
    pub lambda_omega_plus: Option<f64>,
    /// `lambda_{Omega_eta} / lambda_full`.
    pub eigen_ratio: Option<f64>,
    /// `|Omega_{eta^2} \ E| / |E|`, when E is supplied.
    pub outside_e_ratio: Option<f64>,
    /// `|Omega_eta^+ \ Omega_{eta^2}| / |E|`.
    pub plus_excess_ratio: f64,
    /// `lambda_{Omega^+} / lambda_{Omega}`.
    pub plus_eigen_ratio: Option<f64>,
    /// Set when no site reaches the level.
    pub degenerate: bool,
}

fn level_set(pair: &SpectralPair, threshold: f64) -> Vec<Site> {
    pair.sites
        .iter()
        .zip(&pair.values)
        .filter(|(_, &v)| v > 0.0 && v >= threshold)
        .map(|(s, _)| *s)
        .collect()
}

fn lambda_of(sites: &[Site]) -> Result<Option<f64>> {
    if sites.is_empty() {
        return Ok(None);
    }
    let dom = IndexedDomain::new(sites.iter().copied())?;
    Ok(Some(principal_eigen_indexed(&dom, DEFAULT_TOL)?.lambda))
}

/// Level sets `{f >= eta / Esize}` of an eigenfunction, their l-infinity
/// thickening, and the associated eigenvalue and volume ratios.
pub fn level_sets(
    pair: &SpectralPair,
    eta: f64,
    esize: usize,
    e_set: Option<&BTreeSet<Site>>,
) -> Result<LevelSetReport> {
    if !(eta > 0.0 && eta < 1.0) {
        return invalid(format!("eta = {eta} must lie in (0, 1)"));
    }
    if esize == 0 {
        return invalid("Esize must be at least 1");
    }
    let omega = level_set(pair, eta / esize as f64);
    let omega_eta2 = level_set(pair, eta * eta / esize as f64);
    let d = pair.dim();
    let mut plus: BTreeSet<Site> = BTreeSet::new();
    let cube = BoxWindow::centered(d, 1);
    for s in &omega {
        for off in cube.sites() {
            plus.insert(s.add(&off));
        }
    }
    let omega_plus: Vec<Site> = plus.into_iter().collect();

    let lambda_omega = lambda_of(&omega)?;
    let lambda_omega_eta2 = lambda_of(&omega_eta2)?;
    let lambda_omega_plus = lambda_of(&omega_plus)?;
    let e2: BTreeSet<Site> = omega_eta2.iter().copied().collect();
    let outside_e_ratio = e_set
        .map(|e| omega_eta2.iter().filter(|s| !e.contains(s)).count() as f64 / esize as f64);
    let plus_excess_ratio =
        omega_plus.iter().filter(|s| !e2.contains(s)).count() as f64 / esize as f64;
    Ok(LevelSetReport {
        eta,
        esize,
        degenerate: omega.is_empty(),
        eigen_ratio: lambda_omega.map(|l| l / pair.lambda),
        plus_eigen_ratio: lambda_omega.zip(lambda_omega_plus).map(|(a, b)| b / a),
        omega,
        omega_eta2,
        omega_plus,
        lambda_full: pair.lambda,
        lambda_omega,
        lambda_omega_eta2,
        lambda_omega_plus,
        outside_e_ratio,
        plus_excess_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigen::principal_eigen;

    #[test]
    fn ball_is_nearly_symmetric() {
        let r = faber_krahn_report(&LatticeRegion::ball_at_origin(2, 30.0)).unwrap();
        assert!(r.asymmetry <= 0.05, "{r:?}");
        assert_eq!(r.best_center, Site::origin(2));
    }

    #[test]
    fn segment_is_asymmetric() {
        for k in [10, 25, 60] {
            let seg = LatticeRegion::from_sites((0..k).map(|i| Site::new(&[i, 0])));
            let r = faber_krahn_report(&seg).unwrap();
            assert!(r.asymmetry >= 0.5, "K={k}: {r:?}");
        }
    }

    #[test]
    fn level_set_extremes() {
        let pair = principal_eigen(&LatticeRegion::ball_at_origin(2, 5.0), DEFAULT_TOL).unwrap();
        let tiny = level_sets(&pair, 1e-300, 1, None).unwrap();
        assert_eq!(tiny.omega.len(), pair.sites.len());
        let esize = 10;
        let eta = (pair.max_value() * esize as f64 * 1.01).min(0.999);
        let big = level_sets(&pair, eta, esize, None).unwrap();
        assert!(big.omega.is_empty() && big.degenerate);
    }
}
