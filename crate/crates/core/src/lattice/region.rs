use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::lattice::site::{Point, Site, MAX_DIM};

/// Axis-aligned box of sites, bounds inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxWindow {
    pub lo: Site,
    pub hi: Site,
}

impl BoxWindow {
    pub fn new(lo: Site, hi: Site) -> Self {
        assert_eq!(lo.dim(), hi.dim());
        BoxWindow { lo, hi }
    }

    /// `[-r, r]^d`.
    pub fn centered(d: usize, r: i32) -> Self {
        let lo = Site::new(&vec![-r; d]);
        let hi = Site::new(&vec![r; d]);
        BoxWindow { lo, hi }
    }

    /// Cube with lowest corner `corner` and `side` sites per axis.
    pub fn cube(corner: Site, side: i32) -> Self {
        let mut hi = corner;
        for i in 0..corner.dim() {
            hi.set(i, corner.get(i) + side - 1);
        }
        BoxWindow { lo: corner, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn is_empty(&self) -> bool {
        (0..self.dim()).any(|i| self.hi.get(i) < self.lo.get(i))
    }

    #[inline]
    pub fn contains(&self, s: &Site) -> bool {
        for i in 0..self.dim() {
            let c = s.get(i);
            if c < self.lo.get(i) || c > self.hi.get(i) {
                return false;
            }
        }
        true
    }

    pub fn shape(&self) -> [usize; MAX_DIM] {
        let mut sh = [1usize; MAX_DIM];
        for (i, s) in sh.iter_mut().enumerate().take(self.dim()) {
            *s = (self.hi.get(i) - self.lo.get(i) + 1).max(0) as usize;
        }
        sh
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        self.shape().iter().product()
    }

    pub fn intersect(&self, o: &BoxWindow) -> BoxWindow {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for i in 0..self.dim() {
            lo.set(i, lo.get(i).max(o.lo.get(i)));
            hi.set(i, hi.get(i).min(o.hi.get(i)));
        }
        BoxWindow { lo, hi }
    }

    pub fn grow(&self, by: i32) -> BoxWindow {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for i in 0..self.dim() {
            lo.set(i, lo.get(i) - by);
            hi.set(i, hi.get(i) + by);
        }
        BoxWindow { lo, hi }
    }

    /// Sites in lexicographic order.
    pub fn sites(&self) -> BoxIter {
        BoxIter { window: *self, next: (!self.is_empty()).then_some(self.lo) }
    }

    /// Smallest box containing all given sites.
    pub fn bounding<'a>(sites: impl IntoIterator<Item = &'a Site>) -> Option<BoxWindow> {
        let mut it = sites.into_iter();
        let first = *it.next()?;
        let (mut lo, mut hi) = (first, first);
        for s in it {
            for i in 0..first.dim() {
                lo.set(i, lo.get(i).min(s.get(i)));
                hi.set(i, hi.get(i).max(s.get(i)));
            }
        }
        Some(BoxWindow { lo, hi })
    }
}

pub struct BoxIter {
    window: BoxWindow,
    next: Option<Site>,
}

impl Iterator for BoxIter {
    type Item = Site;
    fn next(&mut self) -> Option<Site> {
        let cur = self.next?;
        let d = self.window.dim();
        let mut s = cur;
        let mut axis = d;
        loop {
            if axis == 0 {
                self.next = None;
                break;
            }
            axis -= 1;
            if s.get(axis) < self.window.hi.get(axis) {
                s.set(axis, s.get(axis) + 1);
                self.next = Some(s);
                break;
            }
            s.set(axis, self.window.lo.get(axis));
        }
        Some(cur)
    }
}

/// A finite set of lattice sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum LatticeRegion {
    /// Sites within Euclidean distance `radius` of `center` (boundary included).
    Ball { center: Point, radius: f64 },
    Box { window: BoxWindow },
    Sites { sites: BTreeSet<Site> },
}

impl LatticeRegion {
    pub fn ball(center: Point, radius: f64) -> Self {
        LatticeRegion::Ball { center, radius }
    }

    pub fn ball_at_origin(d: usize, radius: f64) -> Self {
        LatticeRegion::Ball { center: Point::zero(d), radius }
    }

    pub fn cube(corner: Site, side: i32) -> Self {
        LatticeRegion::Box { window: BoxWindow::cube(corner, side) }
    }

    pub fn from_sites(sites: impl IntoIterator<Item = Site>) -> Self {
        LatticeRegion::Sites { sites: sites.into_iter().collect() }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            LatticeRegion::Ball { center, .. } => Some(center.dim()),
            LatticeRegion::Box { window } => Some(window.dim()),
            LatticeRegion::Sites { sites } => sites.iter().next().map(|s| s.dim()),
        }
    }

    #[inline]
    pub fn contains(&self, s: &Site) -> bool {
        match self {
            LatticeRegion::Ball { center, radius } => {
                radius.is_finite()
                    && *radius >= 0.0
                    && center.dist_sq_site(s) <= radius * radius * (1.0 + 1e-12)
            }
            LatticeRegion::Box { window } => window.contains(s),
            LatticeRegion::Sites { sites } => sites.contains(s),
        }
    }

    pub fn bounding_box(&self) -> Option<BoxWindow> {
        match self {
            LatticeRegion::Ball { center, radius } => {
                if !(*radius >= 0.0) || !radius.is_finite() {
                    return None;
                }
                let d = center.dim();
                let mut lo = Site::origin(d);
                let mut hi = Site::origin(d);
                for i in 0..d {
                    lo.set(i, (center.get(i) - radius).floor() as i32);
                    hi.set(i, (center.get(i) + radius).ceil() as i32);
                }
                Some(BoxWindow { lo, hi })
            }
            LatticeRegion::Box { window } => (!window.is_empty()).then_some(*window),
            LatticeRegion::Sites { sites } => BoxWindow::bounding(sites.iter()),
        }
    }

    /// All sites, each exactly once, in lexicographic order.
    pub fn sites(&self) -> Vec<Site> {
        match self {
            LatticeRegion::Sites { sites } => sites.iter().copied().collect(),
            LatticeRegion::Box { window } => window.sites().collect(),
            LatticeRegion::Ball { .. } => match self.bounding_box() {
                Some(b) => b.sites().filter(|s| self.contains(s)).collect(),
                None => Vec::new(),
            },
        }
    }

    pub fn len(&self) -> usize {
        match self {
            LatticeRegion::Sites { sites } => sites.len(),
            LatticeRegion::Box { window } => window.len(),
            LatticeRegion::Ball { .. } => self.sites().len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_site_set(&self) -> BTreeSet<Site> {
        self.sites().into_iter().collect()
    }
}

/// Dense array over a box of sites.
#[derive(Clone, Debug)]
pub struct Grid<T> {
    window: BoxWindow,
    strides: [usize; MAX_DIM],
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn new(window: BoxWindow, fill: T) -> Self {
        let shape = window.shape();
        let mut strides = [0usize; MAX_DIM];
        let mut acc = 1;
        for i in (0..window.dim()).rev() {
            strides[i] = acc;
            acc *= shape[i];
        }
        Grid { window, strides, data: vec![fill; window.len()] }
    }
}

impl<T> Grid<T> {
    pub fn window(&self) -> &BoxWindow {
        &self.window
    }

    pub fn strides(&self) -> &[usize; MAX_DIM] {
        &self.strides
    }

    #[inline]
    pub fn index(&self, s: &Site) -> Option<usize> {
        if !self.window.contains(s) {
            return None;
        }
        Some(self.index_unchecked(s))
    }

    #[inline]
    pub fn index_unchecked(&self, s: &Site) -> usize {
        let mut idx = 0usize;
        for i in 0..self.window.dim() {
            idx += (s.get(i) - self.window.lo.get(i)) as usize * self.strides[i];
        }
        idx
    }

    pub fn site_of(&self, mut idx: usize) -> Site {
        let mut s = self.window.lo;
        for i in 0..self.window.dim() {
            let q = idx / self.strides[i];
            idx -= q * self.strides[i];
            s.set(i, self.window.lo.get(i) + q as i32);
        }
        s
    }

    #[inline]
    pub fn get(&self, s: &Site) -> Option<&T> {
        self.index(s).map(|i| &self.data[i])
    }

    #[inline]
    pub fn get_mut(&mut self, s: &Site) -> Option<&mut T> {
        self.index(s).map(move |i| &mut self.data[i])
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_iteration_covers_once() {
        let b = BoxWindow::new(Site::new(&[-1, 2]), Site::new(&[1, 4]));
        let v: Vec<Site> = b.sites().collect();
        assert_eq!(v.len(), 9);
        assert_eq!(v[0], Site::new(&[-1, 2]));
        assert_eq!(v[1], Site::new(&[-1, 3]));
        let set: BTreeSet<Site> = v.iter().copied().collect();
        assert_eq!(set.len(), 9);
    }

    #[test]
    fn ball_counts() {
        assert_eq!(LatticeRegion::ball_at_origin(2, 1.0).len(), 5);
        assert_eq!(LatticeRegion::ball_at_origin(2, 0.0).len(), 1);
        assert_eq!(LatticeRegion::ball_at_origin(2, 2.0f64.sqrt()).len(), 9);
        assert_eq!(LatticeRegion::ball_at_origin(3, 1.0).len(), 7);
        assert!(LatticeRegion::ball_at_origin(2, -1.0).is_empty());
    }

    #[test]
    fn grid_index_roundtrip() {
        let b = BoxWindow::new(Site::new(&[-2, 0, 5]), Site::new(&[1, 3, 6]));
        let g: Grid<u8> = Grid::new(b, 0);
        for (k, s) in b.sites().enumerate() {
            assert_eq!(g.index(&s), Some(k));
            assert_eq!(g.site_of(k), s);
        }
        assert_eq!(g.index(&Site::new(&[2, 0, 5])), None);
    }
}
