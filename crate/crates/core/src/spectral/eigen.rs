use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeRegion, Site};
use crate::spectral::domain::IndexedDomain;

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_OUTER: usize = 1000;

/// Principal Dirichlet eigenpair. `values[i]` belongs to `sites[i]`; the
/// vector is nonnegative, supported on one connected component, and sums to 1.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralPair {
    pub lambda: f64,
    pub sites: Vec<Site>,
    pub values: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl SpectralPair {
    pub fn dim(&self) -> usize {
        self.sites[0].dim()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn value_at(&self, s: &Site) -> f64 {
        match self.sites.binary_search(s) {
            Ok(i) => self.values[i],
            Err(_) => 0.0,
        }
    }
}

pub fn principal_eigen(domain: &LatticeRegion, tol: f64) -> Result<SpectralPair> {
    principal_eigen_indexed(&IndexedDomain::from_region(domain)?, tol)
}

pub fn principal_eigen_indexed(dom: &IndexedDomain, tol: f64) -> Result<SpectralPair> {
    let mut best: Option<(f64, Vec<usize>, Vec<f64>, f64, usize)> = None;
    for comp in dom.components() {
        let sub = dom.subdomain(&comp);
        let (lambda, f, res, it) = connected_eigen(&sub, tol)?;
        if best.as_ref().map_or(true, |b| lambda < b.0) {
            best = Some((lambda, comp, f, res, it));
        }
    }
    let (lambda, comp, f, residual, iterations) = best.ok_or(Error::EmptyDomain)?;
    let mut values = vec![0.0; dom.len()];
    for (k, &i) in comp.iter().enumerate() {
        values[i] = f[k];
    }
    Ok(SpectralPair { lambda, sites: dom.sites().to_vec(), values, residual, iterations })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rayleigh quotient and `||Lf - lambda f||_inf` for `f` scaled to unit l1 norm.
fn rayleigh_residual(dom: &IndexedDomain, f: &mut [f64], lf: &mut [f64]) -> (f64, f64) {
    let s: f64 = f.iter().map(|x| x.abs()).sum();
    let sign = if f.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for x in f.iter_mut() {
        *x *= sign / s;
    }
    dom.apply_laplacian(f, lf);
    let lambda = dot(f, lf) / dot(f, f);
    let res = f.iter().zip(lf.iter()).map(|(x, l)| (l - lambda * x).abs()).fold(0.0, f64::max);
    (lambda, res)
}

/// Conjugate gradients for `(L - shift) x = b`; `shift` must stay below the
/// smallest eigenvalue so the system is positive definite.
fn conjugate_gradient(dom: &IndexedDomain, shift: f64, b: &[f64], x: &mut [f64]) {
    let n = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let stop = 1e-28 * rr;
    for _ in 0..(20 * n).max(100) {
        if rr <= stop {
            break;
        }
        dom.apply_laplacian(&p, &mut ap);
        for i in 0..n {
            ap[i] -= shift * p[i];
        }
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
}

/// Shifted inverse iteration from the constant vector, stopping as soon as
/// the residual is within `tol`. For positive `f`, `min Lf/f` is a lower
/// bound on the principal eigenvalue, which gives a safe shift.
fn connected_eigen(dom: &IndexedDomain, tol: f64) -> Result<(f64, Vec<f64>, f64, usize)> {
    let n = dom.len();
    let mut f = vec![1.0; n];
    let mut lf = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut best_res = f64::INFINITY;
    for it in 0..MAX_OUTER {
        let (lambda, res) = rayleigh_residual(dom, &mut f, &mut lf);
        best_res = best_res.min(res);
        if res <= tol {
            for x in f.iter_mut() {
                *x = x.abs();
            }
            let (lambda, res) = rayleigh_residual(dom, &mut f, &mut lf);
            return Ok((lambda, f, res.max(0.0), it));
        }
        let mut shift = 0.0;
        if f.iter().all(|&x| x > 0.0) {
            let lb = f.iter().zip(&lf).map(|(x, l)| l / x).fold(f64::INFINITY, f64::min);
            if lb > 0.0 && lb < lambda {
                shift = lb - 0.01 * (lambda - lb);
                shift = shift.max(0.0);
            }
        }
        conjugate_gradient(dom, shift, &f, &mut next);
        std::mem::swap(&mut f, &mut next);
        if !lambda.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence { residual: best_res, iterations: MAX_OUTER })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;

    #[test]
    fn single_site() {
        for d in 1..=4 {
            let r = LatticeRegion::from_sites([Site::origin(d)]);
            let e = principal_eigen(&r, DEFAULT_TOL).unwrap();
            assert_eq!(e.lambda, 1.0);
            assert_eq!(e.values, vec![1.0]);
        }
    }

    #[test]
    fn two_sites() {
        for d in 1..=4 {
            let r = LatticeRegion::from_sites([Site::origin(d), Site::unit(d, 0)]);
            let e = principal_eigen(&r, DEFAULT_TOL).unwrap();
            assert!((e.lambda - (1.0 - 0.5 / d as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn disconnected_takes_minimum() {
        let mut sites = vec![Site::new(&[10, 10])];
        sites.extend([Site::new(&[0, 0]), Site::new(&[0, 1])]);
        let e = principal_eigen(&LatticeRegion::from_sites(sites), DEFAULT_TOL).unwrap();
        assert!((e.lambda - 0.75).abs() < 1e-12);
        assert_eq!(e.value_at(&Site::new(&[10, 10])), 0.0);
        assert!((e.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ball_is_positive_and_normalized() {
        let e = principal_eigen(&LatticeRegion::ball_at_origin(2, 6.0), DEFAULT_TOL).unwrap();
        assert!(e.values.iter().all(|&v| v > 0.0));
        assert!((e.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(e.residual <= DEFAULT_TOL);
    }
}
