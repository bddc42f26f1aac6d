//! Vacant-ball detection: a coarse pass over the empty set followed by an
//! exact Euclidean distance transform to the nearest obstacle.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{BoxWindow, Grid, LatticeRegion, ModelParams, ObstacleField, Point, Site};
use crate::structure::coarse::{empty_box_set, CoarseGrainConfig};
use crate::structure::StructureConstants;
use crate::walk::LatticePath;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectConfig {
    pub iota: f64,
    pub rho: f64,
    #[serde(default)]
    pub constants: StructureConstants,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig { iota: 0.25, rho: 0.04, constants: StructureConstants::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VacantBallReport {
    pub center: Site,
    /// Distance from the center to the nearest obstacle; the open ball of this
    /// radius is obstacle-free.
    pub radius: f64,
    pub rho_n: f64,
    pub delta: f64,
    /// `(1 - delta^c) rho_N`.
    pub radius_inner: f64,
    /// `(1 - 2 delta^c) rho_N`, clamped at zero.
    pub radius_minus: f64,
    /// `(1 + delta^{c/2} (log N)^3) rho_N`.
    pub radius_plus: f64,
    /// Obstacles in the closed ball `B(center, radius_inner)`, by direct recount.
    pub obstacle_count_inside: usize,
    /// Obstacles in the open detected ball, by direct recount (always zero).
    pub obstacles_in_detected: usize,
    /// `B(center, radius_inner)` contained in the path range, when a path is given.
    pub coverage: Option<bool>,
    pub below_threshold: bool,
    /// Rounded mean of the largest empty-tile component, if any.
    pub coarse_candidate: Option<Site>,
    pub coarse_component_sites: usize,
    pub coarse_config: CoarseGrainConfig,
}

impl VacantBallReport {
    pub fn ball_minus(&self) -> LatticeRegion {
        LatticeRegion::ball(self.center.to_point(), self.radius_minus)
    }

    pub fn ball_plus(&self) -> LatticeRegion {
        LatticeRegion::ball(self.center.to_point(), self.radius_plus)
    }
}

/// 1D squared distance transform (lower envelope of parabolas), in place.
fn edt_1d(f: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>, out: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    out.clear();
    let finite: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if finite.is_empty() {
        return;
    }
    for &q in &finite {
        let fq = f[q] + (q * q) as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&r) => {
                    let s = (fq - (f[r] + (r * r) as f64)) / (2.0 * (q as f64 - r as f64));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    let mut k = 0;
    for q in 0..n {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let r = v[k];
        let dq = q as f64 - r as f64;
        out.push(dq * dq + f[r]);
    }
    f.copy_from_slice(out);
}

/// Exact squared Euclidean distance from every site of `window` to the
/// nearest occupied site (sites outside the field window count as occupied).
pub fn squared_distance_transform(field: &ObstacleField, window: &BoxWindow) -> Grid<f64> {
    let padded = window.grow(1);
    let occ = field.materialize(&padded);
    let mut g = Grid::new(padded, 0.0f64);
    for (k, &o) in occ.data().iter().enumerate() {
        g.data_mut()[k] = if o { 0.0 } else { f64::INFINITY };
    }
    let d = window.dim();
    let shape = padded.shape();
    let strides = *g.strides();
    let (mut v, mut z, mut out) = (Vec::new(), Vec::new(), Vec::new());
    let total = g.data().len();
    for axis in 0..d {
        let len = shape[axis];
        let stride = strides[axis];
        let mut line = vec![0.0; len];
        for start in 0..total {
            if (start / stride) % len != 0 {
                continue;
            }
            for (i, x) in line.iter_mut().enumerate() {
                *x = g.data()[start + i * stride];
            }
            edt_1d(&mut line, &mut v, &mut z, &mut out);
            if out.is_empty() {
                continue;
            }
            for (i, x) in line.iter().enumerate() {
                g.data_mut()[start + i * stride] = *x;
            }
        }
    }
    let mut res = Grid::new(*window, 0.0);
    for (k, s) in window.sites().enumerate() {
        res.data_mut()[k] = *g.get(&s).unwrap();
    }
    res
}

/// Obstacles `o` with `|o - c|^2 < r2` (open) or `<= r2` (closed).
fn count_in_ball(field: &ObstacleField, center: &Site, r2: f64, closed: bool) -> usize {
    let r = r2.sqrt().ceil() as i32;
    BoxWindow::centered(center.dim(), r)
        .sites()
        .map(|o| center.add(&o))
        .filter(|s| {
            let q = s.sub(center).norm_sq() as f64;
            (if closed { q <= r2 * (1.0 + 1e-12) } else { q < r2 }) && field.is_occupied(s)
        })
        .count()
}

/// Largest vacant ball in the field window. The center maximizes the distance
/// to the nearest obstacle (ties: smallest site); the coarse stage is reported
/// alongside. `delta` uses the path endpoint when a path is given.
pub fn detect_vacant_ball(
    field: &ObstacleField,
    params: &ModelParams,
    path: Option<&LatticePath>,
    cfg: &DetectConfig,
) -> Result<VacantBallReport> {
    let window = *field.window();
    let d = window.dim();
    let coarse = CoarseGrainConfig::from_params(cfg.iota, cfg.rho, params)?;
    let e = empty_box_set(field, &coarse, &window);
    let comps = e.components();
    let (coarse_candidate, coarse_component_sites) = match comps.first() {
        Some(c) => {
            let mut sum = vec![0.0; d];
            let mut count = 0usize;
            for k in c {
                for s in coarse.tile_window(k).intersect(&window).sites() {
                    for (i, x) in sum.iter_mut().enumerate() {
                        *x += s.get(i) as f64;
                    }
                    count += 1;
                }
            }
            let mean: Vec<f64> = sum.iter().map(|x| x / count as f64).collect();
            (Some(Point::new(&mean).round()), count)
        }
        None => (None, 0),
    };

    let edt = squared_distance_transform(field, &window);
    let mut best = (window.lo, -1.0);
    for (k, s) in window.sites().enumerate() {
        let v = edt.data()[k];
        if v > best.1 {
            best = (s, v);
        }
    }
    let (center, r2) = best;
    let radius = r2.max(0.0).sqrt();

    let rho_n = params.rho_n();
    let x = path.map(|p| p.endpoint().to_point()).unwrap_or_else(|| Point::zero(d));
    let c = &cfg.constants;
    let delta = params.delta_nx_with_exponent(&x, c.delta_exponent);
    let radius_inner = c.radius_inner(delta, rho_n);
    let radius_minus = c.radius_minus(delta, rho_n);
    let radius_plus = c.radius_plus(delta, rho_n, params.n());
    let obstacle_count_inside = count_in_ball(field, &center, radius_inner * radius_inner, true);
    let obstacles_in_detected = count_in_ball(field, &center, r2.max(0.0), false);
    let coverage = path.map(|p| {
        LatticeRegion::ball(center.to_point(), radius_inner).sites().iter().all(|s| p.visit_count(s) > 0)
    });
    Ok(VacantBallReport {
        center,
        radius,
        rho_n,
        delta,
        radius_inner,
        radius_minus,
        radius_plus,
        obstacle_count_inside,
        obstacles_in_detected,
        coverage,
        below_threshold: radius < 0.5 * rho_n,
        coarse_candidate,
        coarse_component_sites,
        coarse_config: coarse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(field: &ObstacleField, w: &BoxWindow) -> Vec<f64> {
        let occ: Vec<Site> = w.grow(1).sites().filter(|s| field.is_occupied(s)).collect();
        w.sites()
            .map(|s| occ.iter().map(|o| s.sub(o).norm_sq() as f64).fold(f64::INFINITY, f64::min))
            .collect()
    }

    #[test]
    fn transform_matches_brute_force() {
        for (d, r, p) in [(2, 9, 0.8), (2, 6, 0.97), (3, 4, 0.9), (1, 20, 0.9)] {
            let w = BoxWindow::centered(d, r);
            let f = ObstacleField::sample(w, p, 11).unwrap();
            let g = squared_distance_transform(&f, &w);
            assert_eq!(g.data(), &brute(&f, &w)[..]);
        }
    }

    #[test]
    fn vacant_field_centers() {
        let w = BoxWindow::centered(2, 12);
        let f = ObstacleField::sample(w, 1.0, 3).unwrap();
        let params = ModelParams::new(2, 0.5, &[0.0, 0.0], 1024).unwrap();
        let rep = detect_vacant_ball(&f, &params, None, &DetectConfig::default()).unwrap();
        assert_eq!(rep.center, Site::origin(2));
        assert_eq!(rep.radius, 13.0);
        assert_eq!(rep.obstacles_in_detected, 0);
    }
}
