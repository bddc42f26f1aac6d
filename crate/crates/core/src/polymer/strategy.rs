//! Explicit three-phase strategy bounding `P x P(S_N = x, tau_O > N)` from
//! below: keep a ball around `y/2` vacant and survive in it up to time `n`,
//! walk inside it to `y` in about `rho_N^2` steps, then cross from `y` to `x`.
//! The pieces are combined through the FKG inequality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BoxWindow, LatticeRegion, ModelParams, Site};
use crate::lyapunov::{crossing_probability, CrossingMethod, NormModel};
use crate::polymer::weight::PolymerWeight;
use crate::spectral::{log_heat_kernel_indexed, log_min_return_probability, log_survival_indexed, IndexedDomain};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StrategyConfig {
    pub epsilon: f64,
    pub crossing_samples: u64,
    pub crossing_theta: Option<f64>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig { epsilon: 0.1, crossing_samples: 20_000, crossing_theta: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum StrategyBranch {
    /// `|x| <= (2 - 4 eps) rho_N`: end the transit phase at `x` itself.
    Inside,
    /// `(2 - 4 eps) rho_N < |x| <= 2 rho_N`: follow a fixed shortest path from `y`.
    NearBoundary,
    /// Cross from `y` to `x` in `M |x - y|` steps.
    Crossing,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StrategyComponents {
    pub branch: StrategyBranch,
    pub y: Site,
    pub ball_center: Site,
    pub ball_radius: f64,
    pub ball_volume: usize,
    /// Duration of the confinement phase.
    pub n: usize,
    pub transit_steps: usize,
    pub crossing_steps: usize,
    /// `|B| log p`: the ball is vacant.
    pub vacancy: f64,
    /// `log P_0(walk stays in the ball up to n)`.
    pub confinement: f64,
    /// `log p^B_{n + t}(0, y) - confinement`.
    pub transit: f64,
    /// `-c(d,p) n^{d/(d+2)}`, the asymptotic cost of surviving to time `n`.
    pub survival_reference: f64,
    /// `log(1/2) + log E[p^{range up to tau}]` from `y` to `x`, or the fixed-path
    /// factor `|y - x|_1 log(p / 2d)`.
    pub crossing: f64,
    pub crossing_stderr: f64,
    /// `|B(x,R)| log p + log min_k p_k^{B(x,R)}(x,x)` with `R = |x - y|^{1/(2d)}`.
    pub pinning: f64,
    pub pinning_radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StrategyBound {
    /// Sum of vacancy, confinement, transit, crossing and pinning terms.
    pub log_lower_bound: f64,
    /// Standard error inherited from the Monte Carlo crossing estimate.
    pub stderr: f64,
    /// Same sum with the survival reference replacing vacancy and confinement.
    pub asymptotic: f64,
    pub components: StrategyComponents,
}

/// Lattice site `y` in `B(0, radius)` minimizing `beta(x - y)`; ties go to the
/// lexicographically smallest site.
pub fn nearest_in_ball(norm: &NormModel, x: &Site, radius: f64) -> Option<(Site, f64)> {
    let d = x.dim();
    let r = radius.floor().max(0.0) as i32;
    let mut best: Option<(Site, f64)> = None;
    for y in BoxWindow::centered(d, r).sites() {
        if y.norm_sq() as f64 > radius * radius {
            continue;
        }
        let b = norm.beta_site(&x.sub(&y));
        if best.map_or(true, |(_, v)| b < v - 1e-12) {
            best = Some((y, b));
        }
    }
    best
}

pub fn strategy_lower_bound(
    params: &ModelParams,
    x: &Site,
    m_factor: usize,
    norm: &NormModel,
    cfg: &StrategyConfig,
    seed: u64,
) -> Result<StrategyBound> {
    let d = params.d();
    if x.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
    }
    let big_n = params.n() as usize;
    if (big_n as i64 - x.l1()).rem_euclid(2) != 0 {
        return Err(Error::Infeasible(format!("{x} is not reachable in {big_n} steps (parity)")));
    }
    let p = params.p();
    let log_p = p.ln();
    let rho = params.rho_n();
    let eps = cfg.epsilon;
    let xn = x.norm();
    let transit_steps = (rho * rho).ceil() as usize;

    let (branch, y) = if xn <= (2.0 - 4.0 * eps) * rho {
        (StrategyBranch::Inside, *x)
    } else {
        let (y, _) = nearest_in_ball(norm, x, (2.0 - 4.0 * eps) * rho)
            .ok_or_else(|| Error::Infeasible("empty target ball".into()))?;
        let b = if xn <= 2.0 * rho { StrategyBranch::NearBoundary } else { StrategyBranch::Crossing };
        (b, y)
    };
    let z = x.sub(&y);
    let crossing_steps = match branch {
        StrategyBranch::Inside => 0,
        StrategyBranch::NearBoundary => z.l1() as usize,
        StrategyBranch::Crossing => {
            let mut m = (m_factor as f64 * z.norm()).ceil() as usize;
            m = m.max(z.l1() as usize);
            if (m as i64 - z.l1()) % 2 != 0 {
                m += 1;
            }
            m
        }
    };
    let n = big_n
        .checked_sub(crossing_steps + transit_steps)
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Infeasible(format!("N = {big_n} too small for the strategy at {x}")))?;

    let ball_radius = params.rho_at(n as f64);
    let center_pt = y.to_point().scale(0.5);
    let ball = LatticeRegion::ball(center_pt, ball_radius);
    let origin = Site::origin(d);
    if !ball.contains(&origin) || !ball.contains(&y) {
        return Err(Error::Infeasible(format!("ball of radius {ball_radius:.3} around y/2 misses 0 or y = {y}")));
    }
    let dom = IndexedDomain::from_region(&ball)?;
    let ball_volume = dom.len();
    let vacancy = ball_volume as f64 * log_p;
    let confinement = log_survival_indexed(&dom, &origin, n)?;
    let reach = log_heat_kernel_indexed(&dom, &origin, &y, n + transit_steps)?;
    if !reach.is_finite() {
        return Err(Error::Infeasible(format!("{y} unreachable inside the ball in {} steps", n + transit_steps)));
    }
    let transit = reach - confinement;
    let survival_reference = -params.cdp() * (n as f64).powf(d as f64 / (d as f64 + 2.0));

    let (crossing, crossing_stderr, pinning, pinning_radius) = match branch {
        StrategyBranch::Inside => (0.0, 0.0, 0.0, 0.0),
        StrategyBranch::NearBoundary => (z.l1() as f64 * (p / (2 * d) as f64).ln(), 0.0, 0.0, 0.0),
        StrategyBranch::Crossing => {
            let w = PolymerWeight::unbiased(d, p)?;
            let est = crossing_probability(
                &w,
                &z,
                1,
                CrossingMethod::TiltedIs { theta: cfg.crossing_theta },
                cfg.crossing_samples,
                seed,
            )?;
            let e = &est.expectation;
            let r = z.norm().powf(1.0 / (2 * d) as f64);
            let pin_ball = IndexedDomain::from_region(&LatticeRegion::ball(x.to_point(), r))?;
            let ret = log_min_return_probability(&pin_ball, x, crossing_steps)?;
            (0.5f64.ln() + e.value.ln(), e.stderr / e.value, pin_ball.len() as f64 * log_p + ret, r)
        }
    };
    let log_lower_bound = vacancy + confinement + transit + crossing + pinning;
    let asymptotic = survival_reference + transit + crossing + pinning;
    Ok(StrategyBound {
        log_lower_bound,
        stderr: crossing_stderr,
        asymptotic,
        components: StrategyComponents {
            branch,
            y,
            ball_center: center_pt.round(),
            ball_radius,
            ball_volume,
            n,
            transit_steps,
            crossing_steps,
            vacancy,
            confinement,
            transit,
            survival_reference,
            crossing,
            crossing_stderr,
            pinning,
            pinning_radius,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymer::enumerate::{for_each_path, Variant};

    fn exact_log(params: &ModelParams, x: &Site) -> f64 {
        let w = PolymerWeight::unbiased(params.d(), params.p()).unwrap();
        let mut z = 0.0;
        for_each_path(&w, params.n() as usize, Variant::Pinned { x: *x }, |l| z += l.weight).unwrap();
        z.ln()
    }

    fn norm() -> NormModel {
        NormModel::from_fn(2, 3.0, |u| 1.3 * u.norm())
    }

    #[test]
    fn inside_branch_has_no_crossing() {
        let params = ModelParams::new(2, 0.7, &[0.0, 0.0], 12).unwrap();
        let x = Site::new(&[2, 0]);
        let b = strategy_lower_bound(&params, &x, 2, &norm(), &StrategyConfig::default(), 1).unwrap();
        assert_eq!(b.components.branch, StrategyBranch::Inside);
        assert_eq!(b.components.y, x);
        assert_eq!(b.components.crossing, 0.0);
        assert_eq!(b.components.pinning, 0.0);
        assert!(b.log_lower_bound <= exact_log(&params, &x));
    }

    #[test]
    fn crossing_branch_is_a_lower_bound() {
        let params = ModelParams::new(2, 0.7, &[0.0, 0.0], 12).unwrap();
        let x = Site::new(&[4, 0]);
        let cfg = StrategyConfig { crossing_samples: 4000, ..Default::default() };
        let b = strategy_lower_bound(&params, &x, 2, &norm(), &cfg, 5).unwrap();
        let c = &b.components;
        assert_eq!(c.branch, StrategyBranch::Crossing);
        assert_eq!(c.n + c.transit_steps + c.crossing_steps, 12);
        let z = x.sub(&c.y);
        let floor = 0.5f64.ln() + (z.l1() as f64) * (0.7f64 / 4.0).ln() + 0.7f64.ln();
        assert!(c.crossing >= floor - 3.0 * c.crossing_stderr);
        assert!(b.log_lower_bound <= exact_log(&params, &x) + 3.0 * b.stderr);
    }

    #[test]
    fn parity_is_checked() {
        let params = ModelParams::new(2, 0.7, &[0.0, 0.0], 12).unwrap();
        assert!(strategy_lower_bound(&params, &Site::new(&[1, 0]), 2, &norm(), &StrategyConfig::default(), 1).is_err());
    }

    #[test]
    fn nearest_prefers_direction_of_target() {
        let (y, b) = nearest_in_ball(&norm(), &Site::new(&[10, 0]), 3.0).unwrap();
        assert_eq!(y, Site::new(&[3, 0]));
        assert!((b - 1.3 * 7.0).abs() < 1e-9);
    }
}
