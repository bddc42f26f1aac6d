//! Coarse-grained empty set: tiles of side `2m + 1` on the grid
//! `(2m + 1) Z^d` whose obstacle fraction is at most `rho`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{BoxWindow, ModelParams, ObstacleField, Point, Site};
use crate::rng::derive_seed;
use crate::stats::MeanVar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoarseGrainConfig {
    pub iota: f64,
    pub rho: f64,
    /// `m = floor(iota rho_N)`; tiles are `c + [-m, m]^d`.
    pub half_width: i32,
}

impl CoarseGrainConfig {
    pub fn new(iota: f64, rho: f64, rho_n: f64) -> Result<Self> {
        if !(iota > 0.0) || !(rho > 0.0 && rho < 1.0) || !(rho_n > 0.0) {
            return invalid(format!("need iota > 0, 0 < rho < 1 (got iota {iota}, rho {rho})"));
        }
        Ok(CoarseGrainConfig { iota, rho, half_width: (iota * rho_n).floor() as i32 })
    }

    pub fn from_params(iota: f64, rho: f64, params: &ModelParams) -> Result<Self> {
        CoarseGrainConfig::new(iota, rho, params.rho_n())
    }

    /// `eta = 2 delta_{N,x}`, `rho = eta^2`, `iota = eta^{5/2}`.
    pub fn coupled(params: &ModelParams, x: &Point) -> Result<Self> {
        let eta = 2.0 * params.delta_nx(x);
        CoarseGrainConfig::new(eta.powf(2.5), eta * eta, params.rho_n())
    }

    pub fn side(&self) -> i32 {
        2 * self.half_width + 1
    }

    pub fn tile_volume(&self, d: usize) -> usize {
        (self.side() as usize).pow(d as u32)
    }

    /// Index `k` of the tile `(2m+1) k + [-m, m]^d` containing `s`.
    pub fn tile_of(&self, s: &Site) -> Site {
        let side = self.side();
        let mut k = *s;
        for i in 0..s.dim() {
            k.set(i, (s.get(i) + self.half_width).div_euclid(side));
        }
        k
    }

    pub fn tile_window(&self, k: &Site) -> BoxWindow {
        let side = self.side();
        let mut lo = *k;
        let mut hi = *k;
        for i in 0..k.dim() {
            lo.set(i, k.get(i) * side - self.half_width);
            hi.set(i, k.get(i) * side + self.half_width);
        }
        BoxWindow::new(lo, hi)
    }

    /// Tile indices meeting `window`.
    pub fn tiles_meeting(&self, window: &BoxWindow) -> BoxWindow {
        BoxWindow::new(self.tile_of(&window.lo), self.tile_of(&window.hi))
    }

    /// Union of the tiles with indices in `[-k, k]^d`.
    pub fn tiled_window(&self, d: usize, k: i32) -> BoxWindow {
        let r = k * self.side() + self.half_width;
        BoxWindow::centered(d, r)
    }
}

/// `E(iota, rho)` restricted to a window.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EmptySet {
    pub config: CoarseGrainConfig,
    pub window: BoxWindow,
    /// Indices of empty tiles meeting the window, with their obstacle counts.
    pub tiles: BTreeMap<Site, usize>,
}

impl EmptySet {
    pub fn contains(&self, s: &Site) -> bool {
        self.window.contains(s) && self.tiles.contains_key(&self.config.tile_of(s))
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.tiles.keys().flat_map(move |k| self.config.tile_window(k).intersect(&self.window).sites())
    }

    /// Number of window sites in `E`.
    pub fn len(&self) -> usize {
        self.tiles.keys().map(|k| self.config.tile_window(k).intersect(&self.window).len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Face-connected components of empty tiles, largest (by window sites)
    /// first; ties go to the component with the smallest tile index.
    pub fn components(&self) -> Vec<Vec<Site>> {
        let mut seen = BTreeSet::new();
        let mut comps = Vec::new();
        for &k in self.tiles.keys() {
            if !seen.insert(k) {
                continue;
            }
            let mut comp = vec![k];
            let mut queue = VecDeque::from([k]);
            while let Some(t) = queue.pop_front() {
                for nb in t.neighbors() {
                    if self.tiles.contains_key(&nb) && seen.insert(nb) {
                        comp.push(nb);
                        queue.push_back(nb);
                    }
                }
            }
            comp.sort();
            comps.push(comp);
        }
        let size = |c: &Vec<Site>| -> usize {
            c.iter().map(|k| self.config.tile_window(k).intersect(&self.window).len()).sum()
        };
        comps.sort_by(|a, b| size(b).cmp(&size(a)).then_with(|| a[0].cmp(&b[0])));
        comps
    }
}

/// Tiles meeting `window` whose obstacle count is at most `rho` times the tile
/// volume. Obstacle counts use the whole tile; sites outside the field window
/// are occupied.
pub fn empty_box_set(field: &ObstacleField, config: &CoarseGrainConfig, window: &BoxWindow) -> EmptySet {
    let d = window.dim();
    let vol = config.tile_volume(d) as f64;
    let mut tiles = BTreeMap::new();
    if !window.is_empty() {
        for k in config.tiles_meeting(window).sites() {
            let count = field.count_occupied(&config.tile_window(&k));
            if count as f64 <= config.rho * vol {
                tiles.insert(k, count);
            }
        }
    }
    EmptySet { config: *config, window: *window, tiles }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VolumeCostReport {
    pub volume: usize,
    pub samples: u64,
    pub hits: u64,
    /// `log` of the hit frequency; `None` when there were no hits.
    pub empirical_log_prob: Option<f64>,
    /// Standard error of the log frequency (delta method).
    pub stderr: Option<f64>,
    /// Upper bound on the log probability when there are no hits:
    /// `log(3 / samples)` (rule of three).
    pub one_sided_log_bound: Option<f64>,
    pub bound: f64,
    /// Empirical value at most `bound + 3 stderr`, or the one-sided bound
    /// is uninformative.
    pub consistent: bool,
}

/// `-V (log(1/p) + 2 rho log rho - log(3N) / (2m)^d)`.
pub fn environment_cost_bound(p: f64, config: &CoarseGrainConfig, d: usize, n: u64, volume: usize) -> f64 {
    let scale = (2 * config.half_width).max(1) as f64;
    let rate = (1.0 / p).ln() + 2.0 * config.rho * config.rho.ln() - (3.0 * n as f64).ln() / scale.powi(d as i32);
    -(volume as f64) * rate
}

/// Monte Carlo estimate of `log P(|E(iota, rho)| = V)` over fresh fields on a
/// window made of whole tiles, compared with the environment cost bound.
pub fn volume_cost_check(
    params: &ModelParams,
    config: &CoarseGrainConfig,
    tiles_per_side: i32,
    volume: usize,
    samples: u64,
    seed: u64,
) -> Result<VolumeCostReport> {
    let d = params.d();
    let tv = config.tile_volume(d);
    if volume % tv != 0 {
        return invalid(format!("volume {volume} is not a multiple of the tile volume {tv}"));
    }
    if samples == 0 {
        return invalid("need at least one sample");
    }
    let window = config.tiled_window(d, tiles_per_side);
    let mut mv = MeanVar::default();
    for i in 0..samples {
        let field = ObstacleField::sample(window, params.p(), derive_seed(seed, i))?;
        let e = empty_box_set(&field, config, &window);
        mv.push(if e.len() == volume { 1.0 } else { 0.0 });
    }
    let hits = (mv.mean * samples as f64).round() as u64;
    let bound = environment_cost_bound(params.p(), config, d, params.n(), volume);
    let (emp, se, one_sided) = if hits > 0 {
        let f = hits as f64 / samples as f64;
        let se = ((1.0 - f) / (hits as f64)).sqrt();
        (Some(f.ln()), Some(se), None)
    } else {
        (None, None, Some((3.0 / samples as f64).ln()))
    };
    let consistent = match (emp, se) {
        (Some(e), Some(s)) => e <= bound + 3.0 * s + 1e-12,
        _ => true,
    };
    Ok(VolumeCostReport {
        volume,
        samples,
        hits,
        empirical_log_prob: emp,
        stderr: se,
        one_sided_log_bound: one_sided,
        bound,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiling_is_a_partition() {
        let c = CoarseGrainConfig { iota: 0.3, rho: 0.1, half_width: 2 };
        let w = BoxWindow::centered(2, 13);
        for s in w.sites() {
            let k = c.tile_of(&s);
            assert!(c.tile_window(&k).contains(&s));
            let owners = c.tiles_meeting(&w).sites().filter(|t| c.tile_window(t).contains(&s)).count();
            assert_eq!(owners, 1);
        }
    }

    #[test]
    fn extreme_fields() {
        let c = CoarseGrainConfig { iota: 0.3, rho: 0.1, half_width: 1 };
        let w = BoxWindow::centered(2, 7);
        let vacant = ObstacleField::sample(w.grow(5), 1.0, 1).unwrap();
        assert_eq!(empty_box_set(&vacant, &c, &w).len(), w.len());
        let full = ObstacleField::sample(w.grow(5), 0.0, 1).unwrap();
        assert!(empty_box_set(&full, &c, &w).is_empty());
    }

    #[test]
    fn zero_volume_bound_is_zero() {
        let c = CoarseGrainConfig { iota: 0.3, rho: 0.1, half_width: 1 };
        assert_eq!(environment_cost_bound(0.5, &c, 2, 100, 0), 0.0);
    }
}
