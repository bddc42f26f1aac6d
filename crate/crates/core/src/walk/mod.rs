//! Nearest-neighbour walk paths, range bookkeeping and hitting times.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{dir_letter, letter_dir, opposite, LatticeRegion, ObstacleField, Site};
use crate::rng::Rng;

/// A finite nearest-neighbour path with incremental range tracking.
#[derive(Clone, PartialEq)]
pub struct LatticePath {
    steps: Vec<u8>,
    positions: Vec<Site>,
    visits: FxHashMap<Site, u32>,
}

impl LatticePath {
    pub fn new(start: Site) -> Self {
        let mut visits = FxHashMap::default();
        visits.insert(start, 1);
        LatticePath { steps: Vec::new(), positions: vec![start], visits }
    }

    pub fn from_steps(start: Site, steps: &[u8]) -> Result<Self> {
        let mut p = LatticePath::new(start);
        p.steps.reserve(steps.len());
        p.positions.reserve(steps.len());
        for &s in steps {
            if s as usize >= 2 * start.dim() {
                return Err(Error::InvalidParameter(format!("step {s} invalid in d={}", start.dim())));
            }
            p.push(s);
        }
        Ok(p)
    }

    /// Path through the given consecutive sites.
    pub fn from_sites(sites: &[Site]) -> Result<Self> {
        let first = *sites.first().ok_or(Error::EmptyDomain)?;
        let mut p = LatticePath::new(first);
        for w in sites.windows(2) {
            let dir = crate::lattice::dir_of(&w[1].sub(&w[0]))
                .ok_or_else(|| Error::InvalidParameter(format!("{} -> {} is not a step", w[0], w[1])))?;
            p.push(dir);
        }
        Ok(p)
    }

    /// Simple random walk of `length` steps. Obstacles do not stop the walk;
    /// survival is read off with [`LatticePath::hitting_record`].
    pub fn simulate(start: Site, length: usize, rng: &mut Rng) -> Self {
        let two_d = 2 * start.dim() as u32;
        let mut p = LatticePath::new(start);
        p.steps.reserve(length);
        p.positions.reserve(length);
        for _ in 0..length {
            p.push(rng.gen_range(0..two_d) as u8);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.positions[0].dim()
    }

    pub fn start(&self) -> Site {
        self.positions[0]
    }

    pub fn endpoint(&self) -> Site {
        *self.positions.last().unwrap()
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[u8] {
        &self.steps
    }

    pub fn positions(&self) -> &[Site] {
        &self.positions
    }

    pub fn position(&self, k: usize) -> Site {
        self.positions[k]
    }

    pub fn push(&mut self, dir: u8) {
        let next = self.endpoint().step(dir);
        self.steps.push(dir);
        self.positions.push(next);
        *self.visits.entry(next).or_insert(0) += 1;
    }

    pub fn pop(&mut self) -> Option<u8> {
        let dir = self.steps.pop()?;
        let last = self.positions.pop().unwrap();
        let c = self.visits.get_mut(&last).unwrap();
        *c -= 1;
        if *c == 0 {
            self.visits.remove(&last);
        }
        Some(dir)
    }

    /// |S[0, len]|.
    pub fn range_size(&self) -> usize {
        self.visits.len()
    }

    pub fn visit_count(&self, s: &Site) -> u32 {
        self.visits.get(s).copied().unwrap_or(0)
    }

    pub fn visits(&self) -> &FxHashMap<Site, u32> {
        &self.visits
    }

    /// Range as a sorted list.
    pub fn range_sites(&self) -> Vec<Site> {
        let mut v: Vec<Site> = self.visits.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// |S[0, k]|.
    pub fn range_size_until(&self, k: usize) -> usize {
        let mut seen = FxHashSet::default();
        for s in &self.positions[..=k.min(self.len())] {
            seen.insert(*s);
        }
        seen.len()
    }

    /// Same sites traversed in the opposite order, starting at the old endpoint.
    pub fn reverse(&self) -> LatticePath {
        let steps: Vec<u8> = self.steps.iter().rev().map(|&s| opposite(s)).collect();
        let positions: Vec<Site> = self.positions.iter().rev().copied().collect();
        LatticePath { steps, positions, visits: self.visits.clone() }
    }

    /// First time the path leaves `region`, if it does.
    pub fn exit_time(&self, region: &LatticeRegion) -> Option<usize> {
        self.positions.iter().position(|s| !region.contains(s))
    }

    /// First time the path stands on an obstacle.
    pub fn obstacle_time(&self, field: &ObstacleField) -> Option<usize> {
        self.positions.iter().position(|s| field.is_occupied(s))
    }

    pub fn hitting_record(
        &self,
        field: Option<&ObstacleField>,
        target: Option<Site>,
        n: usize,
        region: Option<&LatticeRegion>,
    ) -> HittingRecord {
        let pos = &self.positions;
        let tau_obstacle = field.and_then(|f| self.obstacle_time(f));
        let tau_target = target.and_then(|x| pos.iter().position(|s| *s == x));
        let tau_target_after_n =
            target.and_then(|x| pos.iter().skip(n).position(|s| *s == x).map(|k| k + n));
        let (tau_region, last_visit_region) = match region {
            Some(r) => {
                let horizon = tau_target_after_n.unwrap_or(self.len());
                let first = pos[..=horizon].iter().position(|s| r.contains(s));
                let last = pos[..=horizon].iter().rposition(|s| r.contains(s));
                (first, last)
            }
            None => (None, None),
        };
        HittingRecord { tau_obstacle, tau_target, tau_target_after_n, tau_region, last_visit_region }
    }

    /// Compact text form: start coordinates, a colon, then one letter per step.
    pub fn to_compact(&self) -> String {
        let mut s = self.start().to_string();
        s.push(':');
        s.extend(self.steps.iter().map(|&d| dir_letter(d)));
        s
    }

    pub fn from_compact(text: &str) -> Result<Self> {
        let (start, letters) =
            text.split_once(':').ok_or_else(|| Error::Parse(format!("path '{text}': missing ':'")))?;
        let start: Site = start.parse()?;
        let steps: Option<Vec<u8>> = letters.chars().map(|c| letter_dir(c, start.dim())).collect();
        let steps = steps.ok_or_else(|| Error::Parse(format!("path '{text}': bad step letter")))?;
        LatticePath::from_steps(start, &steps)
    }
}

impl fmt::Debug for LatticePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LatticePath({})", self.to_compact())
    }
}

impl FromStr for LatticePath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LatticePath::from_compact(s)
    }
}

impl Serialize for LatticePath {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_compact())
    }
}

impl<'de> Deserialize<'de> for LatticePath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        LatticePath::from_compact(&s).map_err(serde::de::Error::custom)
    }
}

/// Hitting times of a path; `None` means the event does not happen within the path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HittingRecord {
    /// First time on an obstacle.
    pub tau_obstacle: Option<usize>,
    /// First visit to the target.
    pub tau_target: Option<usize>,
    /// First visit to the target at or after time `n`.
    pub tau_target_after_n: Option<usize>,
    /// First visit to the region.
    pub tau_region: Option<usize>,
    /// Last visit to the region up to `tau_target_after_n` (or the path end).
    pub last_visit_region: Option<usize>,
}

impl HittingRecord {
    /// `tau_O > t`.
    pub fn survives_past(&self, t: usize) -> bool {
        self.tau_obstacle.map_or(true, |k| k > t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BoxWindow;
    use crate::rng::rng_from;

    #[test]
    fn push_pop_restores_range() {
        let mut rng = rng_from(5);
        let mut p = LatticePath::simulate(Site::origin(2), 200, &mut rng);
        let sizes: Vec<usize> = (0..=p.len()).map(|k| p.range_size_until(k)).collect();
        while p.pop().is_some() {
            assert_eq!(p.range_size(), sizes[p.len()]);
        }
        assert_eq!(p.range_size(), 1);
    }

    #[test]
    fn there_and_back() {
        let p = LatticePath::from_steps(Site::origin(2), &[0, 1]).unwrap();
        assert_eq!(p.range_size(), 2);
        assert_eq!(p.endpoint(), Site::origin(2));
        let r = p.reverse();
        assert_eq!(r.range_sites(), p.range_sites());
        assert_eq!(r.reverse(), p);
    }

    #[test]
    fn compact_roundtrip() {
        let p = LatticePath::from_steps(Site::new(&[1, -1]), &[0, 2, 3, 1]).unwrap();
        assert_eq!(p.to_compact(), "1,-1:acdb");
        assert_eq!(LatticePath::from_compact("1,-1:acdb").unwrap(), p);
        assert!(LatticePath::from_compact("0,0:ae").is_err());
        let j = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<LatticePath>(&j).unwrap(), p);
    }

    #[test]
    fn hitting_times() {
        let o = Site::origin(2);
        let e1 = Site::unit(2, 0);
        let p = LatticePath::from_steps(o, &[0, 1, 0, 0]).unwrap();
        let w = BoxWindow::centered(2, 5);
        let field = ObstacleField::from_occupied(w, 0.5, 0, [Site::new(&[2, 0])]).unwrap();
        let region = LatticeRegion::from_sites([o]);
        let h = p.hitting_record(Some(&field), Some(e1), 2, Some(&region));
        assert_eq!(h.tau_obstacle, Some(4));
        assert_eq!(h.tau_target, Some(1));
        assert_eq!(h.tau_target_after_n, Some(3));
        assert_eq!(h.tau_region, Some(0));
        assert_eq!(h.last_visit_region, Some(2));
        assert!(h.survives_past(3));
        assert!(!h.survives_past(4));
    }
}
