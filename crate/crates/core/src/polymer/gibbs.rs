//! Joint Gibbs sampler for the pair (environment, path).
//!
//! The target is `P(O) 1{S avoids O up to N} P(S) exp(<h, S_N>)`, whose path
//! marginal is the annealed polymer measure. Inside a finite window the
//! environment given the path is Bernoulli off the range; the path given the
//! environment is drawn exactly by a forward filter and backward sampling
//! pass over the window. Sites outside the window count as occupied. An
//! optional Metropolis move on the environment marginal translates the whole
//! field by one lattice step.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{BoxWindow, Grid, ObstacleField, Point, Site};
use crate::polymer::weight::PolymerWeight;
use crate::rng::{rng_from, Rng};
use crate::walk::LatticePath;

/// Storage type of forward layers.
type Real = f32;

/// Values below this (relative to a layer summing to one) are flushed to zero.
const TINY: Real = 1e-30;
const NORMALIZE_EVERY: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum GibbsInit {
    /// Every window site vacant.
    Vacant,
    /// Vacant ball of the given radius around `center`, Bernoulli elsewhere.
    VacantBall { center: Point, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GibbsConfig {
    /// The window is `[-halfWidth, halfWidth]^d`.
    pub half_width: i32,
    /// Spacing of stored forward layers; 0 picks about `sqrt(N)`.
    pub checkpoint: usize,
    /// Translation proposals per sweep.
    pub shift_proposals: usize,
    /// Translations are uniform on `[-shiftRange, shiftRange]^d` minus the origin.
    pub shift_range: i32,
    pub init: GibbsInit,
}

impl GibbsConfig {
    pub fn new(half_width: i32) -> Self {
        GibbsConfig { half_width, checkpoint: 0, shift_proposals: 1, shift_range: 1, init: GibbsInit::Vacant }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GibbsStats {
    pub sweeps: u64,
    pub shifts_proposed: u64,
    pub shifts_accepted: u64,
    pub forward_passes: u64,
}

pub struct GibbsSampler {
    w: PolymerWeight,
    n: usize,
    cfg: GibbsConfig,
    window: BoxWindow,
    geom: Grid<()>,
    /// Strides of the padded grid, one per axis.
    strides: Vec<usize>,
    lo: usize,
    hi: usize,
    /// Step probability `1/(2d)` on vacant window sites, 0 on obstacles and padding.
    mask: Vec<Real>,
    q: Real,
    interior: Vec<bool>,
    tilt: Vec<f64>,
    origin: usize,
    /// Forward layers at multiples of `k`, each normalized to sum one.
    checkpoints: Vec<Vec<Real>>,
    k: usize,
    /// Terminal conditional law of `S_N`, normalized.
    terminal: Vec<f64>,
    log_z: f64,
    path: Vec<u32>,
    stamp: Vec<u32>,
    generation: u32,
    rng: Rng,
    stats: GibbsStats,
}

impl GibbsSampler {
    pub fn new(w: &PolymerWeight, n: usize, cfg: GibbsConfig, seed: u64) -> Result<Self> {
        if n == 0 {
            return invalid("horizon must be positive");
        }
        if cfg.half_width < 1 {
            return invalid("window half-width must be at least 1");
        }
        let d = w.d;
        let window = BoxWindow::centered(d, cfg.half_width);
        let padded = window.grow(1);
        let geom = Grid::new(padded, ());
        let strides: Vec<usize> = geom.strides()[..d].to_vec();
        let len = padded.len();
        let smax = *strides.iter().max().unwrap();
        let mut interior = vec![false; len];
        let mut tilt = vec![0.0; len];
        for (i, s) in padded.sites().enumerate() {
            interior[i] = window.contains(&s);
            tilt[i] = w.h.dot_site(&s);
        }
        let hmax = tilt.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for t in &mut tilt {
            *t = (*t - hmax).exp();
        }
        let k = if cfg.checkpoint == 0 { ((n as f64).sqrt().ceil() as usize).max(1) } else { cfg.checkpoint };
        let origin = geom.index_unchecked(&Site::origin(d));
        let mut g = GibbsSampler {
            w: *w,
            n,
            window,
            geom,
            strides,
            lo: smax,
            hi: len - smax,
            mask: vec![0.0; len],
            q: 1.0 / (2 * d) as Real,
            interior,
            tilt,
            origin,
            checkpoints: Vec::new(),
            k,
            terminal: vec![0.0; len],
            log_z: f64::NEG_INFINITY,
            path: Vec::new(),
            stamp: vec![0; len],
            generation: 0,
            rng: rng_from(seed),
            stats: GibbsStats::default(),
            cfg,
        };
        g.initialize()?;
        Ok(g)
    }

    fn initialize(&mut self) -> Result<()> {
        let p = self.w.p;
        for i in 0..self.mask.len() {
            if !self.interior[i] {
                continue;
            }
            let vacant = match &self.cfg.init {
                GibbsInit::Vacant => true,
                GibbsInit::VacantBall { center, radius } => {
                    let s = self.geom.site_of(i);
                    center.dist_sq_site(&s) <= radius * radius || self.rng.gen::<f64>() < p
                }
            };
            self.mask[i] = if vacant { self.q } else { 0.0 };
        }
        self.mask[self.origin] = self.q;
        self.forward(true)?;
        self.sample_path();
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> &BoxWindow {
        &self.window
    }

    pub fn config(&self) -> &GibbsConfig {
        &self.cfg
    }

    pub fn stats(&self) -> GibbsStats {
        self.stats
    }

    /// `log E[1{S avoids O up to N} exp(<h, S_N>)]` for the current field.
    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    pub fn endpoint(&self) -> Site {
        self.geom.site_of(*self.path.last().unwrap() as usize)
    }

    pub fn positions(&self) -> Vec<Site> {
        self.path.iter().map(|&i| self.geom.site_of(i as usize)).collect()
    }

    pub fn path(&self) -> LatticePath {
        LatticePath::from_sites(&self.positions()).expect("sampled path is nearest-neighbour")
    }

    pub fn is_occupied(&self, s: &Site) -> bool {
        match self.geom.index(s) {
            Some(i) => self.mask[i] == 0.0,
            None => true,
        }
    }

    /// Current environment as an explicit field over the window.
    pub fn field(&self) -> ObstacleField {
        let mut g = Grid::new(self.window, true);
        for (k, s) in self.window.sites().enumerate() {
            g.data_mut()[k] = self.is_occupied(&s);
        }
        ObstacleField::from_grid(g, self.w.p, 0).expect("p validated")
    }

    /// Law of `S_N` given the current environment.
    pub fn endpoint_law(&self) -> Vec<(Site, f64)> {
        self.terminal
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, &v)| (self.geom.site_of(i), v))
            .collect()
    }

    /// `E[f(S_N) | O]` for the current environment.
    pub fn endpoint_expectation(&self, f: impl Fn(&Site) -> f64) -> f64 {
        self.terminal
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, &v)| v * f(&self.geom.site_of(i)))
            .sum()
    }

    /// Translation-averaged drift: the mean of `<S_N - S_0, u>` when the walk
    /// starts at a site `x` drawn with weight proportional to the partition
    /// function of the field seen from `x`. On the infinite lattice every
    /// translate of the field has the same prior weight, so this is a
    /// Rao-Blackwell estimate of `E<S_N, u>` under the annealed measure; the
    /// window edges make it approximate. Costs one backward pass.
    pub fn translation_averaged_drift(&mut self, u: &Point) -> f64 {
        self.stats.forward_passes += 1;
        // Work with g(x) exp(-<h, x>), which is O(1) across the window: the
        // backward kernel then carries the factor exp(<h, e>) per step e.
        let len = self.mask.len();
        let d = self.strides.len();
        let mut up = vec![0.0 as Real; d];
        let mut down = vec![0.0 as Real; d];
        for i in 0..d {
            // strides are listed by axis; +stride moves +1 along that axis
            up[i] = self.w.h.get(i).exp() as Real;
            down[i] = (-self.w.h.get(i)).exp() as Real;
        }
        let offset: Vec<f64> = (0..len).map(|i| u.dot_site(&self.geom.site_of(i))).collect();
        let mut g = vec![0.0; len];
        let mut g2 = vec![0.0; len];
        let mut tmp = vec![0.0; len];
        for i in 0..len {
            if self.mask[i] > 0.0 {
                g[i] = 1.0;
                g2[i] = offset[i] as Real;
            }
        }
        for t in 1..=self.n {
            Self::advance_tilted(&self.strides, self.lo, self.hi, &self.mask, &up, &down, &g, &mut tmp);
            std::mem::swap(&mut g, &mut tmp);
            Self::advance_tilted(&self.strides, self.lo, self.hi, &self.mask, &up, &down, &g2, &mut tmp);
            std::mem::swap(&mut g2, &mut tmp);
            if t % NORMALIZE_EVERY == 0 || t == self.n {
                let sum: f64 = g.iter().map(|&v| v as f64).sum();
                let inv = (1.0 / sum) as Real;
                g.iter_mut().for_each(|v| *v *= inv);
                g2.iter_mut().for_each(|v| *v *= inv);
            }
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..len {
            if g[i] > 0.0 {
                num += g2[i] as f64 - offset[i] * g[i] as f64;
                den += g[i] as f64;
            }
        }
        num / den
    }

    #[allow(clippy::too_many_arguments)]
    fn advance_tilted(
        strides: &[usize],
        lo: usize,
        hi: usize,
        mask: &[Real],
        up: &[Real],
        down: &[Real],
        src: &[Real],
        dst: &mut [Real],
    ) {
        let out = &mut dst[lo..hi];
        let m = &mask[lo..hi];
        if let [w, one] = *strides {
            debug_assert_eq!(one, 1);
            let (a0, b0, a1, b1) = (up[0], down[0], up[1], down[1]);
            let (l, r) = (&src[lo - 1..hi - 1], &src[lo + 1..hi + 1]);
            let (u, b) = (&src[lo - w..hi - w], &src[lo + w..hi + w]);
            for (((((o, &m), &l), &r), &u), &b) in out.iter_mut().zip(m).zip(l).zip(r).zip(u).zip(b) {
                *o = m * ((b1 * l + a1 * r) + (b0 * u + a0 * b));
            }
            return;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &s) in strides.iter().enumerate() {
            let a = &src[lo - s..hi - s];
            let b = &src[lo + s..hi + s];
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o += down[i] * x + up[i] * y;
            }
        }
        for (o, m) in out.iter_mut().zip(m) {
            *o *= m;
        }
    }

    /// One sweep: environment given path, translation proposals, path given
    /// environment.
    pub fn sweep(&mut self) -> Result<()> {
        self.resample_environment();
        self.forward(true)?;
        if self.cfg.shift_proposals > 0 {
            let mut moved = false;
            for _ in 0..self.cfg.shift_proposals {
                moved |= self.propose_shift();
            }
            if moved {
                self.forward(true)?;
            }
        }
        self.sample_path();
        self.stats.sweeps += 1;
        Ok(())
    }

    fn resample_environment(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        for &i in &self.path {
            self.stamp[i as usize] = self.generation;
        }
        let p = self.w.p;
        for i in 0..self.mask.len() {
            if !self.interior[i] {
                continue;
            }
            let vacant = self.stamp[i] == self.generation || self.rng.gen::<f64>() < p;
            self.mask[i] = if vacant { self.q } else { 0.0 };
        }
    }

    /// Metropolis step on the environment marginal: translate the field by a
    /// random vector and fill the uncovered face with fresh Bernoulli sites. The
    /// proposal ratio cancels the prior ratio, leaving `Z(O') / Z(O)`.
    fn propose_shift(&mut self) -> bool {
        self.stats.shifts_proposed += 1;
        let d = self.w.d;
        let r = self.cfg.shift_range.max(1);
        let mut e = Site::origin(d);
        while e.l1() == 0 {
            for a in 0..d {
                e.set(a, self.rng.gen_range(-r..=r));
            }
        }
        let p = self.w.p;
        let mut proposal = vec![0.0; self.mask.len()];
        for i in 0..self.mask.len() {
            if !self.interior[i] {
                continue;
            }
            let src = self.geom.site_of(i).sub(&e);
            proposal[i] = match self.geom.index(&src) {
                Some(j) if self.interior[j] => self.mask[j],
                _ => {
                    if self.rng.gen::<f64>() < p {
                        self.q
                    } else {
                        0.0
                    }
                }
            };
        }
        if proposal[self.origin] == 0.0 {
            return false;
        }
        let lz = self.log_partition_of(&proposal);
        let u: f64 = self.rng.gen();
        if lz > f64::NEG_INFINITY && u.ln() < lz - self.log_z {
            self.mask = proposal;
            self.log_z = lz;
            self.stats.shifts_accepted += 1;
            true
        } else {
            false
        }
    }

    /// One transition `dst = mask * sum of neighbours of src`, where the mask
    /// carries the `1/(2d)` step probability.
    fn advance(strides: &[usize], lo: usize, hi: usize, mask: &[Real], src: &[Real], dst: &mut [Real]) {
        let out = &mut dst[lo..hi];
        let m = &mask[lo..hi];
        if let [w, one] = *strides {
            debug_assert_eq!(one, 1);
            let (l, r) = (&src[lo - 1..hi - 1], &src[lo + 1..hi + 1]);
            let (u, b) = (&src[lo - w..hi - w], &src[lo + w..hi + w]);
            for (((((o, &m), &l), &r), &u), &b) in out.iter_mut().zip(m).zip(l).zip(r).zip(u).zip(b) {
                *o = m * ((l + r) + (u + b));
            }
            return;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for &s in strides {
            let a = &src[lo - s..hi - s];
            let b = &src[lo + s..hi + s];
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o += x + y;
            }
        }
        for (o, m) in out.iter_mut().zip(m) {
            *o *= m;
        }
    }

    /// Rescale a layer to sum one, flushing negligible entries. Returns the
    /// old sum.
    fn normalize(layer: &mut [Real]) -> f64 {
        let sum: f64 = layer.iter().map(|&v| v as f64).sum();
        if sum > 0.0 {
            let inv = (1.0 / sum) as Real;
            for o in layer.iter_mut() {
                let x = *o * inv;
                *o = if x < TINY { 0.0 } else { x };
            }
        }
        sum
    }

    fn log_partition_of(&mut self, mask: &[Real]) -> f64 {
        self.stats.forward_passes += 1;
        let len = mask.len();
        let mut a = vec![0.0; len];
        let mut b = vec![0.0; len];
        a[self.origin] = 1.0;
        let mut lz = 0.0;
        for t in 1..=self.n {
            Self::advance(&self.strides, self.lo, self.hi, mask, &a, &mut b);
            std::mem::swap(&mut a, &mut b);
            if t % NORMALIZE_EVERY == 0 || t == self.n {
                let s = Self::normalize(&mut a);
                if s == 0.0 {
                    return f64::NEG_INFINITY;
                }
                lz += s.ln();
            }
        }
        let t: f64 = a.iter().zip(&self.tilt).map(|(&x, t)| x as f64 * t).sum();
        lz + t.ln() + self.tilt_offset()
    }

    fn tilt_offset(&self) -> f64 {
        self.window.grow(1).sites().map(|s| self.w.h.dot_site(&s)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn forward(&mut self, store: bool) -> Result<()> {
        self.stats.forward_passes += 1;
        let len = self.mask.len();
        let mut a = vec![0.0; len];
        let mut b = vec![0.0; len];
        a[self.origin] = 1.0;
        if store {
            self.checkpoints.clear();
            self.checkpoints.push(a.clone());
        }
        let mut lz = 0.0;
        for t in 1..=self.n {
            Self::advance(&self.strides, self.lo, self.hi, &self.mask, &a, &mut b);
            std::mem::swap(&mut a, &mut b);
            if t % NORMALIZE_EVERY == 0 || t == self.n {
                let s = Self::normalize(&mut a);
                if s == 0.0 {
                    return Err(Error::Infeasible("no surviving path in the current environment".into()));
                }
                lz += s.ln();
            }
            if store && t % self.k == 0 {
                self.checkpoints.push(a.clone());
            }
        }
        let mut total = 0.0;
        for ((o, x), t) in self.terminal.iter_mut().zip(&a).zip(&self.tilt) {
            *o = *x as f64 * t;
            total += *o;
        }
        self.terminal.iter_mut().for_each(|v| *v /= total);
        self.log_z = lz + total.ln() + self.tilt_offset();
        Ok(())
    }

    fn pick(&mut self, weights: &[(u32, f64)]) -> u32 {
        let total: f64 = weights.iter().map(|w| w.1).sum();
        let mut u = self.rng.gen::<f64>() * total;
        for &(i, w) in weights {
            if u < w {
                return i;
            }
            u -= w;
        }
        weights.iter().rev().find(|w| w.1 > 0.0).unwrap().0
    }

    fn sample_path(&mut self) {
        let len = self.mask.len();
        let n = self.n;
        let k = self.k;
        let mut path = vec![0u32; n + 1];
        let cand: Vec<(u32, f64)> =
            self.terminal.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, &v)| (i as u32, v)).collect();
        path[n] = self.pick(&cand);
        let mut seg = vec![0.0; (k + 1) * len];
        let segments = n.div_ceil(k);
        for j in (0..segments).rev() {
            let start = j * k;
            let end = (start + k).min(n);
            seg[..len].copy_from_slice(&self.checkpoints[j]);
            for t in 1..end - start {
                let (prev, next) = seg.split_at_mut(t * len);
                Self::advance(&self.strides, self.lo, self.hi, &self.mask, &prev[(t - 1) * len..], &mut next[..len]);
                if t % NORMALIZE_EVERY == 0 {
                    Self::normalize(&mut next[..len]);
                }
            }
            for t in (start..end).rev() {
                let layer = &seg[(t - start) * len..(t - start + 1) * len];
                let y = path[t + 1] as usize;
                let mut wts = [(0u32, 0.0); 8];
                let mut m = 0;
                for &s in &self.strides {
                    for z in [y - s, y + s] {
                        wts[m] = (z as u32, layer[z] as f64);
                        m += 1;
                    }
                }
                path[t] = self.pick(&wts[..m]);
            }
        }
        debug_assert_eq!(path[0] as usize, self.origin);
        self.path = path;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymer::enumerate::{exact_distribution, Variant};
    use crate::stats::total_variation;

    #[test]
    fn free_window_partition_is_tilted_walk() {
        // With p = 1 and a window wider than N, Z = (cosh-sum / d)^N.
        let w = PolymerWeight::new(2, 1.0, &[0.3, -0.1]).unwrap();
        let g = GibbsSampler::new(&w, 6, GibbsConfig::new(8), 1).unwrap();
        let m: f64 = (0.3f64.cosh() + 0.1f64.cosh()) / 2.0;
        assert!((g.log_partition() - 6.0 * m.ln()).abs() < 1e-12);
    }

    #[test]
    fn endpoint_law_matches_enumeration() {
        let w = PolymerWeight::new(2, 0.6, &[0.25, 0.0]).unwrap();
        let n = 6;
        let exact = exact_distribution(&w, n, Variant::Tilted, None).unwrap();
        let ex = exact.endpoint.clone();
        let mut cfg = GibbsConfig::new(n as i32 + 1);
        cfg.checkpoint = 4;
        let mut g = GibbsSampler::new(&w, n, cfg, 7).unwrap();
        let sweeps = 60_000;
        let mut acc: std::collections::BTreeMap<Site, f64> = Default::default();
        for _ in 0..200 {
            g.sweep().unwrap();
        }
        for _ in 0..sweeps {
            g.sweep().unwrap();
            for (s, v) in g.endpoint_law() {
                *acc.entry(s).or_default() += v / sweeps as f64;
            }
        }
        let est: Vec<(Site, f64)> = acc.into_iter().collect();
        let tv = total_variation(&ex, &est);
        assert!(tv < 0.01, "tv {tv}");
    }
}
