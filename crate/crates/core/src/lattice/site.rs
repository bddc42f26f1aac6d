use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// A point of Z^d, `1 <= d <= MAX_DIM`. Unused coordinates are always zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Site {
    coords: [i32; MAX_DIM],
    dim: u8,
}

impl Site {
    pub fn origin(d: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d), "dimension {d} out of range");
        Site { coords: [0; MAX_DIM], dim: d as u8 }
    }

    pub fn new(coords: &[i32]) -> Self {
        let mut s = Site::origin(coords.len());
        s.coords[..coords.len()].copy_from_slice(coords);
        s
    }

    /// Unit vector along `axis`.
    pub fn unit(d: usize, axis: usize) -> Self {
        let mut s = Site::origin(d);
        s.coords[axis] = 1;
        s
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn raw(&self) -> &[i32; MAX_DIM] {
        &self.coords
    }

    #[inline]
    pub fn get(&self, axis: usize) -> i32 {
        self.coords[axis]
    }

    #[inline]
    pub fn set(&mut self, axis: usize, v: i32) {
        self.coords[axis] = v;
    }

    /// Neighbour in direction `dir`: `dir = 2 * axis` is +e_axis, `2 * axis + 1` is -e_axis.
    #[inline]
    pub fn step(&self, dir: u8) -> Site {
        let mut s = *self;
        let axis = (dir >> 1) as usize;
        s.coords[axis] += if dir & 1 == 0 { 1 } else { -1 };
        s
    }

    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        (0..2 * self.dim).map(move |k| self.step(k))
    }

    #[inline]
    pub fn add(&self, o: &Site) -> Site {
        let mut s = *self;
        for i in 0..MAX_DIM {
            s.coords[i] += o.coords[i];
        }
        s
    }

    #[inline]
    pub fn sub(&self, o: &Site) -> Site {
        let mut s = *self;
        for i in 0..MAX_DIM {
            s.coords[i] -= o.coords[i];
        }
        s
    }

    pub fn neg(&self) -> Site {
        let mut s = *self;
        for c in s.coords.iter_mut() {
            *c = -*c;
        }
        s
    }

    #[inline]
    pub fn l1(&self) -> i64 {
        self.coords.iter().map(|&c| (c as i64).abs()).sum()
    }

    #[inline]
    pub fn linf(&self) -> i64 {
        self.coords.iter().map(|&c| (c as i64).abs()).max().unwrap_or(0)
    }

    #[inline]
    pub fn norm_sq(&self) -> i64 {
        self.coords.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn to_point(&self) -> Point {
        let mut p = Point::zero(self.dim());
        for i in 0..self.dim() {
            p.coords[i] = self.coords[i] as f64;
        }
        p
    }

    /// Parity of the l1 norm.
    #[inline]
    pub fn parity(&self) -> u8 {
        (self.l1() & 1) as u8
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Site> {
        let coords: std::result::Result<Vec<i32>, _> =
            s.split(',').map(|t| t.trim().parse::<i32>()).collect();
        let coords = coords.map_err(|e| Error::Parse(format!("site '{s}': {e}")))?;
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::Parse(format!("site '{s}': bad dimension")));
        }
        Ok(Site::new(&coords))
    }
}

impl Serialize for Site {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i32>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom("site dimension out of range"));
        }
        Ok(Site::new(&v))
    }
}

/// A point of R^d.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    pub fn zero(d: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d), "dimension {d} out of range");
        Point { coords: [0.0; MAX_DIM], dim: d as u8 }
    }

    pub fn new(coords: &[f64]) -> Self {
        let mut p = Point::zero(coords.len());
        p.coords[..coords.len()].copy_from_slice(coords);
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn get(&self, axis: usize) -> f64 {
        self.coords[axis]
    }

    pub fn scale(&self, a: f64) -> Point {
        let mut p = *self;
        for c in p.coords.iter_mut() {
            *c *= a;
        }
        p
    }

    pub fn add(&self, o: &Point) -> Point {
        let mut p = *self;
        for i in 0..MAX_DIM {
            p.coords[i] += o.coords[i];
        }
        p
    }

    pub fn sub(&self, o: &Point) -> Point {
        let mut p = *self;
        for i in 0..MAX_DIM {
            p.coords[i] -= o.coords[i];
        }
        p
    }

    #[inline]
    pub fn dot(&self, o: &Point) -> f64 {
        let mut s = 0.0;
        for i in 0..MAX_DIM {
            s += self.coords[i] * o.coords[i];
        }
        s
    }

    #[inline]
    pub fn dot_site(&self, s: &Site) -> f64 {
        let mut acc = 0.0;
        for i in 0..MAX_DIM {
            acc += self.coords[i] * s.coords[i] as f64;
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn l1(&self) -> f64 {
        self.coords.iter().map(|c| c.abs()).sum()
    }

    /// Euclidean distance to a site.
    #[inline]
    pub fn dist_sq_site(&self, s: &Site) -> f64 {
        let mut acc = 0.0;
        for i in 0..MAX_DIM {
            let t = s.coords[i] as f64 - self.coords[i];
            acc += t * t;
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0.0)
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Point> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(1.0 / n))
    }

    /// Nearest lattice site, rounding each coordinate half away from zero.
    pub fn round(&self) -> Site {
        let mut s = Site::origin(self.dim());
        for i in 0..self.dim() {
            s.coords[i] = self.coords[i].round() as i32;
        }
        s
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom("point dimension out of range"));
        }
        Ok(Point::new(&v))
    }
}

/// Letter for a step direction: `a` = +e1, `b` = -e1, `c` = +e2, ...
pub fn dir_letter(dir: u8) -> char {
    (b'a' + dir) as char
}

pub fn letter_dir(c: char, d: usize) -> Option<u8> {
    let k = (c as u32).checked_sub('a' as u32)?;
    (k < 2 * d as u32).then_some(k as u8)
}

/// Direction that undoes `dir`.
#[inline]
pub fn opposite(dir: u8) -> u8 {
    dir ^ 1
}

/// Direction of a unit displacement, if it is one.
pub fn dir_of(delta: &Site) -> Option<u8> {
    if delta.l1() != 1 {
        return None;
    }
    let axis = delta.coords().iter().position(|&c| c != 0)?;
    Some(2 * axis as u8 + u8::from(delta.get(axis) < 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_and_back() {
        let s = Site::new(&[3, -2, 5]);
        for dir in 0..6 {
            assert_eq!(s.step(dir).step(opposite(dir)), s);
            assert_eq!(dir_of(&s.step(dir).sub(&s)), Some(dir));
        }
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(Point::new(&[0.5, -0.5]).round(), Site::new(&[1, -1]));
        assert_eq!(Point::new(&[1.49, -2.5]).round(), Site::new(&[1, -3]));
    }

    #[test]
    fn parse_display_roundtrip() {
        let s = Site::new(&[-4, 0, 7]);
        assert_eq!(s.to_string().parse::<Site>().unwrap(), s);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, "[-4,0,7]");
        assert_eq!(serde_json::from_str::<Site>(&j).unwrap(), s);
    }

    #[test]
    fn letters() {
        assert_eq!(dir_letter(0), 'a');
        assert_eq!(dir_letter(3), 'd');
        assert_eq!(letter_dir('d', 2), Some(3));
        assert_eq!(letter_dir('e', 2), None);
    }
}
