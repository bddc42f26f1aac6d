//! Density scan around obstacles: flags `(v, l)` where the obstacle fraction
//! in `B(v, l)` falls below `delta`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{BoxWindow, LatticeRegion, ObstacleField, Point, Site};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DensityFlag {
    pub v: Site,
    pub l: f64,
    pub fraction: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DensityScan {
    pub scales: Vec<f64>,
    pub obstacles_scanned: usize,
    pub flags: Vec<DensityFlag>,
}

/// `l_min, 2 l_min, 4 l_min, ...` up to `l_max`.
pub fn dyadic_scales(l_min: f64, l_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut l = l_min;
    while l <= l_max * (1.0 + 1e-12) {
        out.push(l);
        l *= 2.0;
    }
    out
}

/// Scans every obstacle in `window`. Balls may reach outside the field
/// window, where all sites are occupied.
pub fn density_dichotomy_scan(
    field: &ObstacleField,
    window: &BoxWindow,
    l_min: f64,
    l_max: f64,
    delta: f64,
) -> Result<DensityScan> {
    if !(l_min >= 2.0) || l_max < l_min {
        return invalid(format!("need 2 <= l_min <= l_max (got {l_min}, {l_max})"));
    }
    let d = window.dim();
    let scales = dyadic_scales(l_min, l_max);
    let offsets: Vec<Vec<Site>> =
        scales.iter().map(|&l| LatticeRegion::ball(Point::zero(d), l).sites()).collect();
    let reach = l_max.ceil() as i32;
    let occ = field.materialize(&window.grow(reach));
    let mut flags = Vec::new();
    let mut scanned = 0;
    for v in window.sites() {
        if !*occ.get(&v).unwrap() {
            continue;
        }
        scanned += 1;
        for (l, offs) in scales.iter().zip(&offsets) {
            let count = offs.iter().filter(|o| *occ.get(&v.add(o)).unwrap()).count();
            let fraction = count as f64 / offs.len() as f64;
            if fraction < delta {
                flags.push(DensityFlag { v, l: *l, fraction });
            }
        }
    }
    Ok(DensityScan { scales, obstacles_scanned: scanned, flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Grid;

    #[test]
    fn lone_obstacle_is_flagged() {
        let fw = BoxWindow::centered(2, 30);
        let mut g = Grid::new(fw, false);
        *g.get_mut(&Site::origin(2)).unwrap() = true;
        let f = ObstacleField::from_grid(g, 0.5, 0).unwrap();
        let scan = density_dichotomy_scan(&f, &BoxWindow::centered(2, 0), 8.0, 8.0, 0.01).unwrap();
        assert_eq!(scan.flags.len(), 1);
        assert!(scan.flags[0].fraction < 0.01);
    }

    #[test]
    fn occupied_field_has_no_flags() {
        let w = BoxWindow::centered(2, 5);
        let f = ObstacleField::sample(w, 0.0, 0).unwrap();
        let scan = density_dichotomy_scan(&f, &w, 2.0, 8.0, 0.5).unwrap();
        assert!(scan.flags.is_empty());
        assert_eq!(scan.obstacles_scanned, w.len());
    }
}
