use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::region::{BoxWindow, Grid, LatticeRegion};
use crate::lattice::site::{Point, Site};
use crate::rng::{splitmix64, unit_f64};

/// A ball forced to be vacant on top of the sampled configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedBall {
    pub center: Point,
    pub radius: f64,
}

/// Bernoulli obstacle configuration. Each site of `window` is occupied with
/// probability `1 - p`, independently; every site outside `window` counts as
/// occupied. Occupancy is a hash of `(seed, site)`, so any site can be queried
/// without materializing the field.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawField", into = "RawField")]
pub struct ObstacleField {
    seed: u64,
    window: BoxWindow,
    p: f64,
    planted: Vec<PlantedBall>,
    explicit: Option<Arc<Grid<bool>>>,
}

#[derive(Serialize, Deserialize)]
struct RawField {
    seed: u64,
    window: BoxWindow,
    p: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    planted: Vec<PlantedBall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    occupied: Option<Vec<Site>>,
}

impl TryFrom<RawField> for ObstacleField {
    type Error = Error;
    fn try_from(r: RawField) -> Result<Self> {
        let mut f = match r.occupied {
            Some(occ) => ObstacleField::from_occupied(r.window, r.p, r.seed, occ)?,
            None => ObstacleField::sample(r.window, r.p, r.seed)?,
        };
        f.planted = r.planted;
        Ok(f)
    }
}

impl From<ObstacleField> for RawField {
    fn from(f: ObstacleField) -> Self {
        let occupied = f.explicit.as_ref().map(|g| {
            g.window().sites().filter(|s| *g.get(s).unwrap()).collect::<Vec<_>>()
        });
        RawField { seed: f.seed, window: f.window, p: f.p, planted: f.planted, occupied }
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("vacancy probability {p} outside [0, 1]"));
    }
    Ok(())
}

impl ObstacleField {
    pub fn sample(window: BoxWindow, p: f64, seed: u64) -> Result<Self> {
        check_p(p)?;
        Ok(ObstacleField { seed, window, p, planted: Vec::new(), explicit: None })
    }

    /// Field given by an explicit list of occupied sites inside `window`.
    pub fn from_occupied(
        window: BoxWindow,
        p: f64,
        seed: u64,
        occupied: impl IntoIterator<Item = Site>,
    ) -> Result<Self> {
        check_p(p)?;
        let mut g = Grid::new(window, false);
        for s in occupied {
            match g.get_mut(&s) {
                Some(v) => *v = true,
                None => return invalid(format!("occupied site {s} outside window")),
            }
        }
        Ok(ObstacleField { seed, window, p, planted: Vec::new(), explicit: Some(Arc::new(g)) })
    }

    /// Field backed by a dense occupancy grid whose window is the field window.
    pub fn from_grid(grid: Grid<bool>, p: f64, seed: u64) -> Result<Self> {
        check_p(p)?;
        let window = *grid.window();
        Ok(ObstacleField { seed, window, p, planted: Vec::new(), explicit: Some(Arc::new(grid)) })
    }

    pub fn with_planted_vacant_ball(mut self, center: Point, radius: f64) -> Self {
        self.planted.push(PlantedBall { center, radius });
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn window(&self) -> &BoxWindow {
        &self.window
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn dim(&self) -> usize {
        self.window.dim()
    }
    pub fn planted(&self) -> &[PlantedBall] {
        &self.planted
    }

    #[inline]
    fn hashed_occupied(&self, s: &Site) -> bool {
        let mut h = splitmix64(self.seed ^ 0xD1B5_4A32_D192_ED03);
        for i in 0..s.dim() {
            h = splitmix64(h ^ ((s.get(i) as u32 as u64) | ((i as u64) << 32)));
        }
        unit_f64(h) < 1.0 - self.p
    }

    #[inline]
    pub fn is_occupied(&self, s: &Site) -> bool {
        if !self.window.contains(s) {
            return true;
        }
        for b in &self.planted {
            if b.center.dist_sq_site(s) <= b.radius * b.radius * (1.0 + 1e-12) {
                return false;
            }
        }
        match &self.explicit {
            Some(g) => *g.get(s).unwrap(),
            None => self.hashed_occupied(s),
        }
    }

    pub fn occupied_in(&self, region: &LatticeRegion) -> Vec<Site> {
        region.sites().into_iter().filter(|s| self.is_occupied(s)).collect()
    }

    pub fn count_occupied(&self, window: &BoxWindow) -> usize {
        window.sites().filter(|s| self.is_occupied(s)).count()
    }

    /// Dense occupancy over `window` (`true` = obstacle).
    pub fn materialize(&self, window: &BoxWindow) -> Grid<bool> {
        let mut g = Grid::new(*window, true);
        for (k, s) in window.sites().enumerate() {
            g.data_mut()[k] = self.is_occupied(&s);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes_of_p() {
        let w = BoxWindow::centered(2, 10);
        let empty = ObstacleField::sample(w, 1.0, 3).unwrap();
        let full = ObstacleField::sample(w, 0.0, 3).unwrap();
        assert_eq!(empty.count_occupied(&w), 0);
        assert_eq!(full.count_occupied(&w), w.len());
        assert!(empty.is_occupied(&Site::new(&[11, 0])));
    }

    #[test]
    fn density_near_one_minus_p() {
        let w = BoxWindow::centered(2, 100);
        let f = ObstacleField::sample(w, 0.3, 42).unwrap();
        let frac = f.count_occupied(&w) as f64 / w.len() as f64;
        assert!((frac - 0.7).abs() < 0.01, "{frac}");
    }

    #[test]
    fn same_seed_same_field() {
        let w = BoxWindow::centered(3, 6);
        let a = ObstacleField::sample(w, 0.5, 9).unwrap();
        let b = ObstacleField::sample(w, 0.5, 9).unwrap();
        let c = ObstacleField::sample(w, 0.5, 10).unwrap();
        let oa: Vec<bool> = w.sites().map(|s| a.is_occupied(&s)).collect();
        let ob: Vec<bool> = w.sites().map(|s| b.is_occupied(&s)).collect();
        let oc: Vec<bool> = w.sites().map(|s| c.is_occupied(&s)).collect();
        assert_eq!(oa, ob);
        assert_ne!(oa, oc);
    }

    #[test]
    fn planted_ball_is_vacant() {
        let w = BoxWindow::centered(2, 30);
        let f = ObstacleField::sample(w, 0.0, 1)
            .unwrap()
            .with_planted_vacant_ball(Point::new(&[3.0, -2.0]), 5.0);
        let ball = LatticeRegion::ball(Point::new(&[3.0, -2.0]), 5.0);
        assert!(f.occupied_in(&ball).is_empty());
        assert!(f.is_occupied(&Site::new(&[3, 4])));
    }

    #[test]
    fn json_roundtrip() {
        let w = BoxWindow::centered(2, 5);
        let f = ObstacleField::sample(w, 0.5, 77).unwrap();
        let j = serde_json::to_string(&f).unwrap();
        assert!(j.contains("\"seed\":77"));
        let g: ObstacleField = serde_json::from_str(&j).unwrap();
        assert!(w.sites().all(|s| f.is_occupied(&s) == g.is_occupied(&s)));

        let e = ObstacleField::from_occupied(w, 0.5, 0, [Site::new(&[1, 1])]).unwrap();
        let j = serde_json::to_string(&e).unwrap();
        let g: ObstacleField = serde_json::from_str(&j).unwrap();
        assert!(g.is_occupied(&Site::new(&[1, 1])));
        assert!(!g.is_occupied(&Site::new(&[0, 1])));
    }
}
