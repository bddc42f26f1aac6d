//! Exact evaluation of the polymer measures by depth-first enumeration of all
//! nearest-neighbour paths. Feasible up to a few billion leaves.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{BoxWindow, Grid, Site};
use crate::polymer::survival::{annealed_survival_estimate, SurvivalMethod};
use crate::polymer::weight::PolymerWeight;

const MAX_LEAVES: f64 = 4.0e9;

/// Which measure to enumerate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Variant {
    /// `mu_N^h`: paths of length N weighted by `p^{range} exp(<h, S_N>)`.
    Tilted,
    /// Paths of length N with `S_N = x`, weighted by `p^{range}`.
    Pinned { x: Site },
    /// Paths stopped at `tau_x^N` (first visit to x at or after N),
    /// weighted by `p^{|S[0, tau]|}`; paths with `tau > cap` are dropped.
    Hitting { x: Site, cap: usize },
}

/// A complete path handed to an enumeration visitor.
pub struct Leaf<'a> {
    pub positions: &'a [Site],
    pub steps: &'a [u8],
    pub range: usize,
    /// Unnormalized weight including the `(2d)^{-k}` path probability.
    pub weight: f64,
}

/// Visit every path of the chosen variant with positive weight. Returns the
/// number of leaves.
pub fn for_each_path(
    w: &PolymerWeight,
    n: usize,
    variant: Variant,
    mut visit: impl FnMut(&Leaf<'_>),
) -> Result<u64> {
    if n == 0 {
        return invalid("path length must be positive");
    }
    let d = w.d;
    let two_d = 2 * d;
    let (target, max_depth) = match variant {
        Variant::Tilted => (None, n),
        Variant::Pinned { x } => (Some(x), n),
        Variant::Hitting { x, cap } => {
            if cap < n {
                return invalid("cap must be at least N");
            }
            (Some(x), cap)
        }
    };
    if let Some(x) = target {
        if x.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
        }
    }
    let leaves_bound = (two_d as f64).powi(max_depth as i32);
    if leaves_bound > MAX_LEAVES && target.is_none() {
        return Err(Error::EnumerationTooLarge(leaves_bound));
    }

    let window = BoxWindow::centered(d, max_depth as i32);
    let mut counts: Grid<u16> = Grid::new(window, 0);
    let origin = Site::origin(d);
    let log_p = w.log_p();
    let log_step = -(two_d as f64).ln();

    let mut positions = vec![origin];
    let mut steps: Vec<u8> = Vec::with_capacity(max_depth);
    let mut next_dir: Vec<u8> = vec![0];
    let mut range = 1usize;
    *counts.get_mut(&origin).unwrap() = 1;
    let mut leaves = 0u64;

    loop {
        let depth = steps.len();
        let k = *next_dir.last().unwrap();
        if k as usize == two_d {
            next_dir.pop();
            if depth == 0 {
                break;
            }
            steps.pop();
            let last = positions.pop().unwrap();
            let c = counts.get_mut(&last).unwrap();
            *c -= 1;
            if *c == 0 {
                range -= 1;
            }
            continue;
        }
        *next_dir.last_mut().unwrap() += 1;

        let pos = positions[depth].step(k);
        let new_depth = depth + 1;
        if let Some(x) = target {
            if pos.sub(&x).l1() > (max_depth - new_depth) as i64 {
                continue;
            }
        }
        let c = counts.get_mut(&pos).unwrap();
        *c += 1;
        let fresh = *c == 1;
        if fresh {
            range += 1;
        }
        steps.push(k);
        positions.push(pos);

        let is_leaf = match variant {
            Variant::Tilted => new_depth == n,
            Variant::Pinned { x } => new_depth == n && pos == x,
            Variant::Hitting { x, .. } => new_depth >= n && pos == x,
        };
        if is_leaf {
            let tilt = match variant {
                Variant::Tilted => w.h.dot_site(&pos),
                _ => 0.0,
            };
            let weight = (new_depth as f64 * log_step + range as f64 * log_p + tilt).exp();
            leaves += 1;
            visit(&Leaf { positions: &positions, steps: &steps, range, weight });
        }
        if is_leaf || new_depth == max_depth {
            steps.pop();
            positions.pop();
            let c = counts.get_mut(&pos).unwrap();
            *c -= 1;
            if fresh {
                range -= 1;
            }
        } else {
            next_dir.push(0);
        }
    }
    Ok(leaves)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub variant: Variant,
    pub n: usize,
    /// Total weight: `E[p^{range} e^{<h,S_N>}]` for the tilted measure, the
    /// corresponding restricted expectation for the other variants.
    pub partition: f64,
    /// Law of `S_N`, sorted by site.
    pub endpoint: Vec<(Site, f64)>,
    /// Law of the range size.
    pub range: Vec<(usize, f64)>,
    /// Law of the stopping time (hitting variant only).
    pub tau: Vec<(usize, f64)>,
    /// Upper bound on the weight lost to the cap (hitting variant only).
    pub truncation_bound: Option<f64>,
    pub leaves: u64,
}

impl ExactDistribution {
    pub fn endpoint_prob(&self, s: &Site) -> f64 {
        self.endpoint.binary_search_by(|(k, _)| k.cmp(s)).map(|i| self.endpoint[i].1).unwrap_or(0.0)
    }
}

fn sorted_normalized<K: Ord + Copy>(m: FxHashMap<K, f64>, z: f64) -> Vec<(K, f64)> {
    let mut v: Vec<(K, f64)> = m.into_iter().map(|(k, w)| (k, w / z)).collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

/// Exact law of the endpoint and range under the given variant.
/// `truncation` = (samples, seed) for the Monte Carlo bound on the mass lost
/// beyond the cap of the hitting variant.
pub fn exact_distribution(
    w: &PolymerWeight,
    n: usize,
    variant: Variant,
    truncation: Option<(u64, u64)>,
) -> Result<ExactDistribution> {
    let mut endpoint: FxHashMap<Site, f64> = FxHashMap::default();
    let mut range: FxHashMap<usize, f64> = FxHashMap::default();
    let mut tau: FxHashMap<usize, f64> = FxHashMap::default();
    let mut z = 0.0;
    let leaves = for_each_path(w, n, variant, |leaf| {
        z += leaf.weight;
        let pn = leaf.positions[n.min(leaf.positions.len() - 1)];
        *endpoint.entry(pn).or_default() += leaf.weight;
        *range.entry(leaf.range).or_default() += leaf.weight;
        if matches!(variant, Variant::Hitting { .. }) {
            *tau.entry(leaf.steps.len()).or_default() += leaf.weight;
        }
    })?;
    if z <= 0.0 {
        return Err(Error::Estimator("variant has no admissible path".into()));
    }
    let truncation_bound = match (variant, truncation) {
        (Variant::Hitting { cap, .. }, Some((samples, seed))) => {
            let unbiased = PolymerWeight::unbiased(w.d, w.p)?;
            let e = annealed_survival_estimate(&unbiased, cap, SurvivalMethod::Plain, samples, seed)?;
            Some(e.value + 3.0 * e.stderr)
        }
        _ => None,
    };
    Ok(ExactDistribution {
        variant,
        n,
        partition: z,
        endpoint: sorted_normalized(endpoint, z),
        range: sorted_normalized(range, z),
        tau: sorted_normalized(tau, z),
        truncation_bound,
        leaves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_partition() {
        for p in [0.2, 0.5, 0.9] {
            let w = PolymerWeight::unbiased(2, p).unwrap();
            let e = exact_distribution(&w, 2, Variant::Tilted, None).unwrap();
            let z = (4.0 * p * p + 12.0 * p * p * p) / 16.0;
            assert!((e.partition - z).abs() < 1e-15);
            assert_eq!(e.leaves, 16);
        }
    }

    #[test]
    fn free_walk_endpoint_law() {
        let w = PolymerWeight::unbiased(2, 1.0).unwrap();
        let e = exact_distribution(&w, 4, Variant::Tilted, None).unwrap();
        assert!((e.partition - 1.0).abs() < 1e-14);
        assert!((e.endpoint_prob(&Site::origin(2)) - 36.0 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn pinned_leaves_end_at_target() {
        let w = PolymerWeight::unbiased(2, 0.5).unwrap();
        let x = Site::new(&[2, 0]);
        let mut count = 0;
        for_each_path(&w, 4, Variant::Pinned { x }, |l| {
            assert_eq!(*l.positions.last().unwrap(), x);
            count += 1;
        })
        .unwrap();
        // orderings of {+e1,+e1,+e2,-e2} and {+e1,+e1,+e1,-e1}: 12 + 4
        assert_eq!(count, 16);
    }

    #[test]
    fn hitting_stops_at_first_visit_after_n() {
        let w = PolymerWeight::unbiased(2, 0.5).unwrap();
        let x = Site::unit(2, 0);
        for_each_path(&w, 3, Variant::Hitting { x, cap: 7 }, |l| {
            let k = l.steps.len();
            assert!(k >= 3 && k <= 7);
            assert_eq!(l.positions[k], x);
            assert!(l.positions[3..k].iter().all(|s| *s != x));
        })
        .unwrap();
    }
}
