use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::lattice::{LatticeRegion, Site};

pub(crate) const NONE: u32 = u32::MAX;

/// A finite site set with sorted numbering and a neighbour table.
#[derive(Clone, Debug)]
pub struct IndexedDomain {
    d: usize,
    sites: Vec<Site>,
    index: FxHashMap<Site, u32>,
    nbr: Vec<u32>,
}

impl IndexedDomain {
    pub fn new(sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        let mut sites: Vec<Site> = sites.into_iter().collect();
        sites.sort_unstable();
        sites.dedup();
        let d = sites.first().ok_or(Error::EmptyDomain)?.dim();
        let index: FxHashMap<Site, u32> =
            sites.iter().enumerate().map(|(i, s)| (*s, i as u32)).collect();
        let mut nbr = vec![NONE; sites.len() * 2 * d];
        for (i, s) in sites.iter().enumerate() {
            for k in 0..2 * d {
                if let Some(&j) = index.get(&s.step(k as u8)) {
                    nbr[i * 2 * d + k] = j;
                }
            }
        }
        Ok(IndexedDomain { d, sites, index, nbr })
    }

    pub fn from_region(region: &LatticeRegion) -> Result<Self> {
        IndexedDomain::new(region.sites())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn index_of(&self, s: &Site) -> Option<usize> {
        self.index.get(s).map(|&i| i as usize)
    }

    pub fn require(&self, s: &Site) -> Result<usize> {
        self.index_of(s).ok_or_else(|| Error::NotInDomain(s.to_string()))
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        let k = 2 * self.d;
        &self.nbr[i * k..(i + 1) * k]
    }

    /// `out = P_U f`: one step of the walk killed on leaving the domain.
    pub fn apply_transition(&self, f: &[f64], out: &mut [f64]) {
        let w = 1.0 / (2 * self.d) as f64;
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for &j in self.neighbors(i) {
                if j != NONE {
                    s += f[j as usize];
                }
            }
            *o = w * s;
        }
    }

    /// `out = L f = f - P_U f`.
    pub fn apply_laplacian(&self, f: &[f64], out: &mut [f64]) {
        self.apply_transition(f, out);
        for (o, &x) in out.iter_mut().zip(f) {
            *o = x - *o;
        }
    }

    /// Connected components as sorted index lists, ordered by smallest site.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for root in 0..n {
            if comp[root] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![root];
            comp[root] = id;
            stack.push(root);
            while let Some(i) = stack.pop() {
                for &j in self.neighbors(i) {
                    if j != NONE && comp[j as usize] == usize::MAX {
                        comp[j as usize] = id;
                        members.push(j as usize);
                        stack.push(j as usize);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn subdomain(&self, indices: &[usize]) -> IndexedDomain {
        IndexedDomain::new(indices.iter().map(|&i| self.sites[i])).expect("nonempty")
    }
}
