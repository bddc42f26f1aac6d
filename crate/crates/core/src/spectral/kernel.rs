use crate::error::{Error, Result};
use crate::lattice::{LatticeRegion, Site};
use crate::spectral::domain::IndexedDomain;

/// Distribution of the killed walk after `n` steps from index `start`, as
/// `(v, log_scale)` with true mass `v[i] * exp(log_scale)`.
pub fn evolve(dom: &IndexedDomain, start: usize, n: usize) -> (Vec<f64>, f64) {
    let mut v = vec![0.0; dom.len()];
    v[start] = 1.0;
    let mut log_scale = 0.0;
    evolve_in_place(dom, &mut v, &mut log_scale, n, |_, _, _| {});
    (v, log_scale)
}

/// Apply the killed kernel `n` times, calling `visit(k, v, log_scale)` after each step.
pub fn evolve_in_place(
    dom: &IndexedDomain,
    v: &mut Vec<f64>,
    log_scale: &mut f64,
    n: usize,
    mut visit: impl FnMut(usize, &[f64], f64),
) {
    let mut w = vec![0.0; dom.len()];
    for k in 1..=n {
        dom.apply_transition(v, &mut w);
        std::mem::swap(v, &mut w);
        let m = v.iter().copied().fold(0.0, f64::max);
        if m == 0.0 {
            *log_scale = f64::NEG_INFINITY;
        } else if m < 1e-150 {
            for x in v.iter_mut() {
                *x /= m;
            }
            *log_scale += m.ln();
        }
        visit(k, v, *log_scale);
    }
}

fn log_of(mass: f64, log_scale: f64) -> f64 {
    if mass <= 0.0 {
        f64::NEG_INFINITY
    } else {
        mass.ln() + log_scale
    }
}

/// `log P_x(tau_{U^c} > n)`.
pub fn log_survival_indexed(dom: &IndexedDomain, start: &Site, n: usize) -> Result<f64> {
    let i = dom.require(start)?;
    let (v, ls) = evolve(dom, i, n);
    Ok(log_of(v.iter().sum(), ls))
}

/// `P_x(tau_{U^c} > n)`: the walk from `start` stays in the domain for `n` steps.
pub fn survival_exact(domain: &LatticeRegion, start: &Site, n: usize) -> Result<f64> {
    log_survival_indexed(&IndexedDomain::from_region(domain)?, start, n).map(f64::exp)
}

pub fn log_survival_exact(domain: &LatticeRegion, start: &Site, n: usize) -> Result<f64> {
    log_survival_indexed(&IndexedDomain::from_region(domain)?, start, n)
}

/// `log p_n^U(x, y)`.
pub fn log_heat_kernel_indexed(dom: &IndexedDomain, x: &Site, y: &Site, n: usize) -> Result<f64> {
    let i = dom.require(x)?;
    let j = dom.require(y)?;
    if (n as i64 + x.sub(y).l1()) % 2 != 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (v, ls) = evolve(dom, i, n);
    Ok(log_of(v[j], ls))
}

/// `p_n^U(x, y)`, the transition probability of the walk killed on leaving U.
pub fn killed_heat_kernel(domain: &LatticeRegion, x: &Site, y: &Site, n: usize) -> Result<f64> {
    log_killed_heat_kernel(domain, x, y, n).map(f64::exp)
}

pub fn log_killed_heat_kernel(domain: &LatticeRegion, x: &Site, y: &Site, n: usize) -> Result<f64> {
    log_heat_kernel_indexed(&IndexedDomain::from_region(domain)?, x, y, n)
}

/// `log min_{k <= kmax, k even} p_k^U(x, x)`.
pub fn log_min_return_probability(dom: &IndexedDomain, x: &Site, kmax: usize) -> Result<f64> {
    let i = dom.require(x)?;
    let mut v = vec![0.0; dom.len()];
    v[i] = 1.0;
    let mut ls = 0.0;
    let mut best: f64 = 0.0;
    evolve_in_place(dom, &mut v, &mut ls, kmax, |k, v, ls| {
        if k % 2 == 0 {
            best = best.min(log_of(v[i], ls));
        }
    });
    if best.is_nan() {
        return Err(Error::Estimator("return probability underflow".into()));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;

    #[test]
    fn trivial_domains() {
        let o = Site::origin(2);
        let single = LatticeRegion::from_sites([o]);
        assert_eq!(survival_exact(&single, &o, 0).unwrap(), 1.0);
        assert_eq!(survival_exact(&single, &o, 1).unwrap(), 0.0);
        let pair = LatticeRegion::from_sites([o, Site::unit(2, 0)]);
        assert_eq!(survival_exact(&pair, &o, 1).unwrap(), 0.25);
        assert!(survival_exact(&pair, &Site::new(&[5, 5]), 1).is_err());
    }

    #[test]
    fn heat_kernel_small_cases() {
        let ball = LatticeRegion::ball_at_origin(3, 3.0);
        let o = Site::origin(3);
        let e = Site::unit(3, 1);
        assert_eq!(killed_heat_kernel(&ball, &o, &o, 0).unwrap(), 1.0);
        assert!((killed_heat_kernel(&ball, &o, &e, 1).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(killed_heat_kernel(&ball, &o, &e, 4).unwrap(), 0.0);
    }

    #[test]
    fn chapman_kolmogorov() {
        let ball = LatticeRegion::ball_at_origin(2, 4.0);
        let dom = IndexedDomain::from_region(&ball).unwrap();
        let x = Site::new(&[1, 0]);
        let y = Site::new(&[-2, 1]);
        let (m, n) = (5usize, 8usize);
        let (vx, _) = evolve(&dom, dom.index_of(&x).unwrap(), m);
        let (vy, _) = evolve(&dom, dom.index_of(&y).unwrap(), n);
        let lhs = killed_heat_kernel(&ball, &x, &y, m + n).unwrap();
        let rhs: f64 = vx.iter().zip(&vy).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
