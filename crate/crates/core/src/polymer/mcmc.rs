//! Metropolis sampler on step sequences of fixed length for the polymer
//! measure `mu_N^h` and its pinned version. All proposals are symmetric, so
//! the acceptance ratio is the weight ratio.

use rand::Rng as _;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{opposite, Site};
use crate::polymer::weight::PolymerWeight;
use crate::rng::{rng_from, Rng};
use crate::walk::LatticePath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TailCut {
    /// Cut point uniform on `0..N`.
    Uniform,
    /// Suffix length log-uniform on `1..=N`; favours short tails for long paths.
    LogUniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct McmcConfig {
    pub flip: f64,
    pub crankshaft: f64,
    pub tail: f64,
    pub reversal: f64,
    /// Longest window redrawn by a crankshaft move.
    pub max_window: usize,
    pub tail_cut: TailCut,
    /// Full recomputation of the cached weight every this many steps.
    pub check_every: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            flip: 0.3,
            crankshaft: 0.3,
            tail: 0.35,
            reversal: 0.05,
            max_window: 8,
            tail_cut: TailCut::Uniform,
            check_every: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum McmcVariant {
    Tilted,
    Pinned { x: Site },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct McmcStats {
    /// Per move kind: flip, crankshaft, tail, reversal.
    pub proposed: [u64; 4],
    pub accepted: [u64; 4],
    pub checkpoints: u64,
    /// Largest discrepancy between cached and recomputed log weight.
    pub max_drift: f64,
}

fn unit_step(d: usize, dir: u8) -> Site {
    Site::origin(d).step(dir)
}

/// Counts of k-step walks by displacement, k <= kmax.
#[derive(Clone, Debug)]
struct WalkCounts {
    table: Vec<FxHashMap<Site, f64>>,
}

impl WalkCounts {
    fn new(d: usize, kmax: usize) -> Self {
        let mut table = Vec::with_capacity(kmax + 1);
        let mut cur = FxHashMap::default();
        cur.insert(Site::origin(d), 1.0);
        table.push(cur.clone());
        for _ in 0..kmax {
            let mut next: FxHashMap<Site, f64> = FxHashMap::default();
            for (s, &c) in &cur {
                for k in 0..2 * d {
                    *next.entry(s.step(k as u8)).or_default() += c;
                }
            }
            table.push(next.clone());
            cur = next;
        }
        WalkCounts { table }
    }

    fn get(&self, k: usize, disp: &Site) -> f64 {
        self.table[k].get(disp).copied().unwrap_or(0.0)
    }
}

pub struct PathMcmc {
    w: PolymerWeight,
    n: usize,
    variant: McmcVariant,
    cfg: McmcConfig,
    rng: Rng,
    steps: Vec<u8>,
    pos: Vec<Site>,
    counts: FxHashMap<Site, u32>,
    range: usize,
    log_weight: f64,
    walk_counts: WalkCounts,
    stats: McmcStats,
    iterations: u64,
    scratch: Vec<Site>,
}

impl PathMcmc {
    pub fn new(w: PolymerWeight, n: usize, variant: McmcVariant, cfg: McmcConfig, seed: u64) -> Result<Self> {
        if n < 2 {
            return invalid("MCMC needs N >= 2");
        }
        let total = cfg.flip + cfg.crankshaft + cfg.tail + cfg.reversal;
        if !(total > 0.0) || [cfg.flip, cfg.crankshaft, cfg.tail, cfg.reversal].iter().any(|&x| x < 0.0) {
            return invalid("move probabilities must be nonnegative with positive sum");
        }
        let d = w.d;
        let e1 = 0u8;
        let steps = match variant {
            McmcVariant::Tilted => (0..n).map(|k| if k % 2 == 0 { e1 } else { opposite(e1) }).collect(),
            McmcVariant::Pinned { x } => {
                if x.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
                }
                if x.l1() > n as i64 || (x.l1() - n as i64) % 2 != 0 {
                    return invalid(format!("{x} unreachable in exactly {n} steps"));
                }
                let mut s = Vec::with_capacity(n);
                for axis in 0..d {
                    let c = x.get(axis);
                    let dir = 2 * axis as u8 + u8::from(c < 0);
                    s.extend(std::iter::repeat(dir).take(c.unsigned_abs() as usize));
                }
                while s.len() < n {
                    s.push(e1);
                    s.push(opposite(e1));
                }
                s
            }
        };
        let path = LatticePath::from_steps(Site::origin(d), &steps)?;
        let mut m = PathMcmc {
            w,
            n,
            variant,
            cfg,
            rng: rng_from(seed),
            steps,
            pos: path.positions().to_vec(),
            counts: path.visits().clone(),
            range: path.range_size(),
            log_weight: 0.0,
            walk_counts: WalkCounts::new(d, cfg.max_window.min(n)),
            stats: McmcStats::default(),
            iterations: 0,
            scratch: Vec::new(),
        };
        m.log_weight = m.fresh_log_weight();
        Ok(m)
    }

    fn fresh_log_weight(&self) -> f64 {
        self.range as f64 * self.w.log_p() + self.w.h.dot_site(&self.pos[self.n])
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn endpoint(&self) -> Site {
        self.pos[self.n]
    }
    pub fn range_size(&self) -> usize {
        self.range
    }
    pub fn positions(&self) -> &[Site] {
        &self.pos
    }
    pub fn steps(&self) -> &[u8] {
        &self.steps
    }
    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }
    pub fn stats(&self) -> &McmcStats {
        &self.stats
    }
    pub fn path(&self) -> LatticePath {
        LatticePath::from_steps(self.pos[0], &self.steps).expect("valid steps")
    }

    fn inc(&mut self, s: Site) {
        let c = self.counts.entry(s).or_insert(0);
        *c += 1;
        if *c == 1 {
            self.range += 1;
        }
    }

    fn dec(&mut self, s: Site) {
        let c = self.counts.get_mut(&s).expect("site in range");
        *c -= 1;
        if *c == 0 {
            self.counts.remove(&s);
            self.range -= 1;
        }
    }

    /// Replace `steps[from..from+new.len()]`, updating positions after `from`
    /// (the displacement may change only when the segment reaches the end).
    /// Returns `true` if accepted.
    fn try_replace(&mut self, from: usize, new: &[u8]) -> bool {
        let len = new.len();
        let end = from + len;
        let mut p = self.pos[from];
        let mut new_pos = std::mem::take(&mut self.scratch);
        new_pos.clear();
        for &s in new {
            p = p.step(s);
            new_pos.push(p);
        }
        if end < self.n {
            debug_assert_eq!(p, self.pos[end]);
        }
        if let McmcVariant::Pinned { x } = self.variant {
            if end == self.n && p != x {
                self.scratch = new_pos;
                return false;
            }
        }
        let old_weight = self.log_weight;
        for k in from + 1..=end {
            let s = self.pos[k];
            self.dec(s);
        }
        for &s in &new_pos {
            self.inc(s);
        }
        let new_weight = self.range as f64 * self.w.log_p()
            + self.w.h.dot_site(if end == self.n { &p } else { &self.pos[self.n] });
        let delta = new_weight - old_weight;
        let accept = delta >= 0.0 || self.rng.gen::<f64>() < delta.exp();
        if accept {
            self.steps[from..end].copy_from_slice(new);
            self.pos[from + 1..=end].copy_from_slice(&new_pos);
            self.log_weight = new_weight;
        } else {
            for &s in &new_pos {
                self.dec(s);
            }
            for k in from + 1..=end {
                let s = self.pos[k];
                self.inc(s);
            }
        }
        self.scratch = new_pos;
        accept
    }

    fn move_flip(&mut self) -> bool {
        let i = self.rng.gen_range(0..self.n - 1);
        let (a, b) = (self.steps[i], self.steps[i + 1]);
        if a == b {
            return true;
        }
        self.try_replace(i, &[b, a])
    }

    fn move_crankshaft(&mut self) -> bool {
        let lmax = self.cfg.max_window.min(self.n).max(2);
        let l = self.rng.gen_range(2..=lmax);
        let i = self.rng.gen_range(0..=self.n - l);
        let mut rem = self.pos[i + l].sub(&self.pos[i]);
        let two_d = 2 * self.w.d;
        let mut seg = Vec::with_capacity(l);
        for j in 0..l {
            let r = l - j;
            let mut weights = [0.0f64; 8];
            let mut total = 0.0;
            for (k, wk) in weights.iter_mut().enumerate().take(two_d) {
                *wk = self.walk_counts.get(r - 1, &rem.sub(&unit_step(self.w.d, k as u8)));
                total += *wk;
            }
            let mut u = self.rng.gen::<f64>() * total;
            let mut chosen = None;
            for (k, &wk) in weights.iter().enumerate().take(two_d) {
                if wk > 0.0 {
                    chosen = Some(k as u8);
                    if u < wk {
                        break;
                    }
                }
                u -= wk;
            }
            let k = chosen.expect("reachable displacement");
            seg.push(k);
            rem = rem.sub(&unit_step(self.w.d, k));
        }
        self.try_replace(i, &seg)
    }

    fn move_tail(&mut self) -> bool {
        let n = self.n;
        let cut = match self.cfg.tail_cut {
            TailCut::Uniform => self.rng.gen_range(0..n),
            TailCut::LogUniform => {
                let len = ((self.rng.gen::<f64>() * ((n + 1) as f64).ln()).exp().floor() as usize).clamp(1, n);
                n - len
            }
        };
        let two_d = 2 * self.w.d as u32;
        let seg: Vec<u8> = (cut..n).map(|_| self.rng.gen_range(0..two_d) as u8).collect();
        self.try_replace(cut, &seg)
    }

    fn move_reversal(&mut self) -> bool {
        let seg: Vec<u8> = self.steps.iter().rev().map(|&s| opposite(s)).collect();
        self.try_replace(0, &seg)
    }

    /// One Metropolis step.
    pub fn step(&mut self) {
        let c = &self.cfg;
        let total = c.flip + c.crankshaft + c.tail + c.reversal;
        let u = self.rng.gen::<f64>() * total;
        let kind = if u < c.flip {
            0
        } else if u < c.flip + c.crankshaft {
            1
        } else if u < c.flip + c.crankshaft + c.tail {
            2
        } else {
            3
        };
        let acc = match kind {
            0 => self.move_flip(),
            1 => self.move_crankshaft(),
            2 => self.move_tail(),
            _ => self.move_reversal(),
        };
        self.stats.proposed[kind] += 1;
        self.stats.accepted[kind] += u64::from(acc);
        self.iterations += 1;
        if self.cfg.check_every > 0 && self.iterations % self.cfg.check_every == 0 {
            self.checkpoint();
        }
    }

    /// Recompute range and weight from the step sequence and record the drift.
    pub fn checkpoint(&mut self) {
        let mut p = self.pos[0];
        let mut seen = FxHashSet::default();
        seen.insert(p);
        for (k, &s) in self.steps.iter().enumerate() {
            p = p.step(s);
            assert_eq!(p, self.pos[k + 1], "position cache corrupted");
            seen.insert(p);
        }
        assert_eq!(seen.len(), self.range, "range cache corrupted");
        let fresh = self.fresh_log_weight();
        self.stats.max_drift = self.stats.max_drift.max((fresh - self.log_weight).abs());
        self.stats.checkpoints += 1;
        self.log_weight = fresh;
    }

    /// Run `burn_in` steps, then call `f` every `thin` steps, `samples` times.
    pub fn sample(&mut self, burn_in: u64, samples: u64, thin: u64, mut f: impl FnMut(&PathMcmc)) {
        for _ in 0..burn_in {
            self.step();
        }
        for _ in 0..samples {
            for _ in 0..thin.max(1) {
                self.step();
            }
            f(self);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_start_and_moves_keep_endpoint() {
        let w = PolymerWeight::new(2, 0.5, &[0.3, 0.0]).unwrap();
        let x = Site::new(&[2, -1]);
        let mut m = PathMcmc::new(w, 9, McmcVariant::Pinned { x }, McmcConfig::default(), 4).unwrap();
        for _ in 0..20_000 {
            m.step();
            assert_eq!(m.endpoint(), x);
        }
        m.checkpoint();
        assert!(m.stats().max_drift < 1e-9);
    }

    #[test]
    fn unreachable_pin_rejected() {
        let w = PolymerWeight::unbiased(2, 0.5).unwrap();
        let bad = McmcVariant::Pinned { x: Site::new(&[1, 1]) };
        assert!(PathMcmc::new(w, 5, bad, McmcConfig::default(), 0).is_err());
    }

    #[test]
    fn crankshaft_keeps_displacement() {
        let w = PolymerWeight::unbiased(3, 1.0).unwrap();
        let cfg = McmcConfig { flip: 0.0, crankshaft: 1.0, tail: 0.0, reversal: 0.0, ..Default::default() };
        let mut m = PathMcmc::new(w, 12, McmcVariant::Tilted, cfg, 9).unwrap();
        let end = m.endpoint();
        for _ in 0..5000 {
            m.step();
        }
        assert_eq!(m.endpoint(), end);
        assert_eq!(m.stats().accepted[1], 5000);
    }
}
