//! Continuum constants: Bessel zeros, ball volumes and the optimal-ball radius.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::site::{Point, MAX_DIM};

/// Volume of the unit Euclidean ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// J_nu(x) divided by (x/2)^nu / Gamma(nu + 1); same positive zeros as J_nu.
fn scaled_bessel_series(nu: f64, x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// First positive zero of J_nu, for nu > -1, to about 1e-13.
pub fn first_bessel_zero(nu: f64) -> f64 {
    assert!(nu > -1.0, "order must exceed -1");
    let f = |x: f64| scaled_bessel_series(nu, x);
    let step = 0.01;
    let mut a = step;
    let fa0 = f(a);
    let mut b = a + step;
    while f(b).signum() == fa0.signum() {
        a = b;
        b += step;
        assert!(b < 100.0, "no zero found");
    }
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Principal Dirichlet eigenvalue of -(1/2d) Laplacian on the unit ball of R^d.
pub fn continuum_lambda(d: usize) -> f64 {
    let j = first_bessel_zero(d as f64 / 2.0 - 1.0);
    j * j / (2.0 * d as f64)
}

/// Optimal radius and the value of `lambda / r^2 + omega_d r^d log(1/p)` at it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rho1Cdp {
    pub rho1: f64,
    pub cdp: f64,
    pub lambda: f64,
}

pub fn compute_rho1_and_cdp(d: usize, p: f64) -> Result<Rho1Cdp> {
    if !(1..=MAX_DIM).contains(&d) {
        return invalid(format!("dimension {d} not in 1..={MAX_DIM}"));
    }
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("p = {p} must lie in (0, 1)"));
    }
    let lambda = continuum_lambda(d);
    let omega = unit_ball_volume(d);
    let l = (1.0 / p).ln();
    let df = d as f64;
    let rho1 = (2.0 * lambda / (df * omega * l)).powf(1.0 / (df + 2.0));
    let cdp = lambda / (rho1 * rho1) + omega * rho1.powi(d as i32) * l;
    Ok(Rho1Cdp { rho1, cdp, lambda })
}

/// Model parameters: dimension, vacancy probability, drift and path length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    d: usize,
    p: f64,
    h: Point,
    n: u64,
    consts: Rho1Cdp,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    d: usize,
    p: f64,
    h: Vec<f64>,
    n: u64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = crate::error::Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ModelParams::new(r.d, r.p, &r.h, r.n)
    }
}

impl From<ModelParams> for RawParams {
    fn from(m: ModelParams) -> Self {
        RawParams { d: m.d, p: m.p, h: m.h.coords().to_vec(), n: m.n }
    }
}

impl ModelParams {
    pub fn new(d: usize, p: f64, h: &[f64], n: u64) -> Result<Self> {
        if h.len() != d {
            return invalid(format!("drift has {} components, dimension is {d}", h.len()));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return invalid("drift must be finite");
        }
        if n == 0 {
            return invalid("N must be positive");
        }
        let consts = compute_rho1_and_cdp(d, p)?;
        Ok(ModelParams { d, p, h: Point::new(h), n, consts })
    }

    pub fn with_n(&self, n: u64) -> Result<Self> {
        ModelParams::new(self.d, self.p, self.h.coords(), n)
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn h(&self) -> &Point {
        &self.h
    }
    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn log_inv_p(&self) -> f64 {
        -self.p.ln()
    }
    pub fn rho1(&self) -> f64 {
        self.consts.rho1
    }
    pub fn cdp(&self) -> f64 {
        self.consts.cdp
    }
    pub fn lambda_cont(&self) -> f64 {
        self.consts.lambda
    }

    /// rho_N = rho_1 N^{1/(d+2)}.
    pub fn rho_n(&self) -> f64 {
        self.rho_at(self.n as f64)
    }

    pub fn rho_at(&self, n: f64) -> f64 {
        self.consts.rho1 * n.powf(1.0 / (self.d as f64 + 2.0))
    }

    /// Unit drift direction, or `None` when h = 0.
    pub fn e_h(&self) -> Option<Point> {
        self.h.normalized()
    }

    /// delta_{N,x} = max(rho_N^{-1/5}, |x| / rho_N^d).
    pub fn delta_nx(&self, x: &Point) -> f64 {
        self.delta_nx_with_exponent(x, 0.2)
    }

    pub fn delta_nx_with_exponent(&self, x: &Point, exponent: f64) -> f64 {
        let r = self.rho_n();
        r.powf(-exponent).max(x.norm() / r.powi(self.d as i32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_bessel_zeros() {
        let pi = std::f64::consts::PI;
        assert!((first_bessel_zero(-0.5) - pi / 2.0).abs() < 1e-12);
        assert!((first_bessel_zero(0.0) - 2.404_825_557_695_773).abs() < 1e-12);
        assert!((first_bessel_zero(0.5) - pi).abs() < 1e-12);
        assert!((first_bessel_zero(1.0) - 3.831_705_970_207_512).abs() < 1e-12);
    }

    #[test]
    fn ball_volumes() {
        let pi = std::f64::consts::PI;
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - pi).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * pi / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - pi * pi / 2.0).abs() < 1e-14);
    }

    #[test]
    fn planar_constants() {
        let c = compute_rho1_and_cdp(2, 0.5).unwrap();
        assert!((c.lambda - 1.44580).abs() < 1e-5);
        assert!((c.rho1 - 0.90268).abs() < 1e-5);
        assert!((c.cdp - 3.5487).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(compute_rho1_and_cdp(2, 0.0).is_err());
        assert!(compute_rho1_and_cdp(2, 1.0).is_err());
        assert!(compute_rho1_and_cdp(5, 0.5).is_err());
        assert!(ModelParams::new(2, 0.5, &[0.1], 10).is_err());
    }

    #[test]
    fn params_serde_roundtrip() {
        let m = ModelParams::new(2, 0.7, &[0.2, 0.0], 1024).unwrap();
        let j = serde_json::to_string(&m).unwrap();
        let back: ModelParams = serde_json::from_str(&j).unwrap();
        assert_eq!(m, back);
        assert!((m.rho_n() - m.rho1() * 1024f64.powf(0.25)).abs() < 1e-12);
    }
}
